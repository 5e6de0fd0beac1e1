#pragma once

#include "anisoheat/amg.hpp"
#include "anisoheat/assembly.hpp"
#include "anisoheat/blocksolve.hpp"
#include "anisoheat/config.hpp"
#include "anisoheat/experiments.hpp"
#include "anisoheat/krylov.hpp"
#include "anisoheat/mesh.hpp"
#include "anisoheat/problems.hpp"
#include "anisoheat/space.hpp"
#include "anisoheat/sparse.hpp"
#include "anisoheat/spectra.hpp"
#include "anisoheat/timeloop.hpp"
