#pragma once

// Experiment configuration: INI files with a fixed schema. Every key is
// optional; unknown sections and keys are rejected.
//
//   [mesh]    n, length, Lz, layers, refine_layers, periodic_z, perturb, seed, refinements, geometry (2d | 3d)
//   [physics] kappa_perp, ratios, dt, n_steps, bc (dirichlet | neumann), kappa_bc, kappa_p, kappa_p_aniso
//   [scheme]  schemes (mixed-dg, primal-dg)
//   [solver]  strategies (air, schur-classical, direct), outer_tol, max_outer, max_inner,
//             inner_tol, upper_triangular, time_cap
//   [amg]     theta_C, theta_R, theta_classical, max_coarse, max_levels, seed
//   [eigs]    dts, boundary_mass (both | with | without), tol, max_lanczos, seed
//   [output]  dir
//
// List values are comma separated.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "anisoheat/blocksolve.hpp"
#include "anisoheat/timeloop.hpp"

namespace anisoheat {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct ExperimentConfig {
  // mesh
  int n = 7;
  double length = 1.0;
  double Lz = 5.0;
  int layers = 2;  // at refinement 0
  bool refine_layers = true;  // double the layers with each refinement
  bool periodic_z = true;
  double perturb = 0.06;
  std::uint64_t mesh_seed = 0;
  std::vector<int> refinements{0, 1};
  std::string geometry = "3d";

  // physics
  double kappa_perp = 1.0;
  std::vector<double> ratios{1e3, 1e6, 1e9};
  double dt = 1e-3;
  int n_steps = 100;
  BoundaryKind bc = BoundaryKind::Dirichlet;
  double kappa_bc = 20.0;
  double kappa_p = kDefaultInteriorPenalty;
  double kappa_p_aniso = 10.0;

  std::vector<Scheme> schemes{Scheme::MixedDg, Scheme::PrimalDg};

  std::vector<Strategy> strategies{Strategy::Air, Strategy::SchurClassical};
  BlockSolverOptions solver;
  double time_cap = 1500.0;  // seconds per run

  std::vector<double> eig_dts{1e-3, 1e-2};
  std::vector<bool> eig_boundary_mass{true, false};
  double eig_tol = 1e-8;
  int eig_max_lanczos = 300;
  std::uint64_t eig_seed = 0;

  std::string out_dir = "out";
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) continue;
    out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

inline long to_long(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (d != static_cast<double>(static_cast<long>(d))) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return static_cast<long>(d);
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

}  // namespace detail

inline const std::map<std::string, std::set<std::string>>& config_schema() {
  static const std::map<std::string, std::set<std::string>> schema{
      {"mesh", {"n", "length", "Lz", "layers", "refine_layers", "periodic_z", "perturb", "seed", "refinements", "geometry"}},
      {"physics", {"kappa_perp", "ratios", "dt", "n_steps", "bc", "kappa_bc", "kappa_p", "kappa_p_aniso"}},
      {"scheme", {"schemes"}},
      {"solver",
       {"strategies", "outer_tol", "max_outer", "max_inner", "inner_tol", "upper_triangular", "time_cap"}},
      {"amg", {"theta_C", "theta_R", "theta_classical", "max_coarse", "max_levels", "seed"}},
      {"eigs", {"dts", "boundary_mass", "tol", "max_lanczos", "seed"}},
      {"output", {"dir"}},
  };
  return schema;
}

/// Parses and validates INI text.
inline ExperimentConfig parse_config(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  const auto& schema = config_schema();
  ExperimentConfig c;
  for (const auto& [section, body] : tree) {
    if (!body.data().empty()) throw ConfigError("key '" + section + "' outside of any section");
    const auto it = schema.find(section);
    if (it == schema.end()) throw ConfigError("unknown section [" + section + "]");
    for (const auto& [key, node] : body) {
      if (!it->second.count(key)) throw ConfigError("unknown key '" + key + "' in [" + section + "]");
      const std::string v = node.get_value<std::string>();
      const std::string name = section + "." + key;
      using namespace detail;
      if (section == "mesh") {
        if (key == "n") c.n = static_cast<int>(to_long(name, v));
        else if (key == "length") c.length = to_double(name, v);
        else if (key == "Lz") c.Lz = to_double(name, v);
        else if (key == "layers") c.layers = static_cast<int>(to_long(name, v));
        else if (key == "refine_layers") c.refine_layers = to_bool(name, v);
        else if (key == "periodic_z") c.periodic_z = to_bool(name, v);
        else if (key == "perturb") c.perturb = to_double(name, v);
        else if (key == "seed") c.mesh_seed = static_cast<std::uint64_t>(to_long(name, v));
        else if (key == "geometry") c.geometry = v;
        else if (key == "refinements") {
          c.refinements.clear();
          for (const auto& s : split_list(v)) c.refinements.push_back(static_cast<int>(to_long(name, s)));
        }
      } else if (section == "physics") {
        if (key == "kappa_perp") c.kappa_perp = to_double(name, v);
        else if (key == "dt") c.dt = to_double(name, v);
        else if (key == "n_steps") c.n_steps = static_cast<int>(to_long(name, v));
        else if (key == "kappa_bc") c.kappa_bc = to_double(name, v);
        else if (key == "kappa_p") c.kappa_p = to_double(name, v);
        else if (key == "kappa_p_aniso") c.kappa_p_aniso = to_double(name, v);
        else if (key == "bc") {
          if (v == "dirichlet") c.bc = BoundaryKind::Dirichlet;
          else if (v == "neumann") c.bc = BoundaryKind::Neumann;
          else throw ConfigError(name + ": expected dirichlet or neumann, got '" + v + "'");
        } else if (key == "ratios") {
          c.ratios.clear();
          for (const auto& s : split_list(v)) c.ratios.push_back(to_double(name, s));
        }
      } else if (section == "scheme") {
        c.schemes.clear();
        try {
          for (const auto& s : split_list(v)) c.schemes.push_back(parse_scheme(s));
        } catch (const ConfigError&) {
          throw;
        } catch (const Error& e) {
          throw ConfigError(name + ": " + e.what());
        }
      } else if (section == "solver") {
        if (key == "strategies") {
          c.strategies.clear();
          try {
            for (const auto& s : split_list(v)) c.strategies.push_back(parse_strategy(s));
          } catch (const ConfigError&) {
            throw;
          } catch (const Error& e) {
            throw ConfigError(name + ": " + e.what());
          }
        } else if (key == "outer_tol") c.solver.outer_tol = to_double(name, v);
        else if (key == "max_outer") c.solver.max_outer = static_cast<int>(to_long(name, v));
        else if (key == "max_inner") c.solver.max_inner = static_cast<int>(to_long(name, v));
        else if (key == "inner_tol") c.solver.inner_tol = to_double(name, v);
        else if (key == "upper_triangular") c.solver.upper_triangular = to_bool(name, v);
        else if (key == "time_cap") c.time_cap = to_double(name, v);
      } else if (section == "amg") {
        if (key == "theta_C") c.solver.amg.theta_C = to_double(name, v);
        else if (key == "theta_R") c.solver.amg.theta_R = to_double(name, v);
        else if (key == "theta_classical") c.solver.amg.theta_classical = to_double(name, v);
        else if (key == "max_coarse") c.solver.amg.max_coarse = static_cast<int>(to_long(name, v));
        else if (key == "max_levels") c.solver.amg.max_levels = static_cast<int>(to_long(name, v));
        else if (key == "seed") c.solver.amg.seed = static_cast<std::uint64_t>(to_long(name, v));
      } else if (section == "eigs") {
        if (key == "dts") {
          c.eig_dts.clear();
          for (const auto& s : split_list(v)) c.eig_dts.push_back(to_double(name, s));
        } else if (key == "boundary_mass") {
          if (v == "both") c.eig_boundary_mass = {true, false};
          else if (v == "with") c.eig_boundary_mass = {true};
          else if (v == "without") c.eig_boundary_mass = {false};
          else throw ConfigError(name + ": expected both, with or without, got '" + v + "'");
        } else if (key == "tol") c.eig_tol = to_double(name, v);
        else if (key == "max_lanczos") c.eig_max_lanczos = static_cast<int>(to_long(name, v));
        else if (key == "seed") c.eig_seed = static_cast<std::uint64_t>(to_long(name, v));
      } else if (section == "output") {
        c.out_dir = v;
      }
    }
  }

  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(c.n >= 2, "mesh.n must be at least 2");
  require(c.length > 0.0 && c.Lz > 0.0, "mesh.length and mesh.Lz must be positive");
  require(c.layers >= 1, "mesh.layers must be positive");
  require(c.perturb >= 0.0 && c.perturb < 0.5, "mesh.perturb must lie in [0, 0.5)");
  require(c.geometry == "2d" || c.geometry == "3d", "mesh.geometry must be 2d or 3d");
  require(!c.refinements.empty(), "mesh.refinements must not be empty");
  for (int r : c.refinements) require(r >= 0 && r <= 4, "mesh.refinements entries must lie in 0..4");
  require(c.kappa_perp >= 0.0, "physics.kappa_perp must be non-negative");
  require(!c.ratios.empty(), "physics.ratios must not be empty");
  for (double r : c.ratios) require(r >= 1.0, "physics.ratios entries must be at least 1");
  require(c.dt > 0.0, "physics.dt must be positive");
  require(c.n_steps >= 1, "physics.n_steps must be positive");
  require(c.kappa_bc >= 0.0 && c.kappa_p > 0.0 && c.kappa_p_aniso > 0.0, "physics penalties must be positive");
  require(!c.schemes.empty(), "scheme.schemes must not be empty");
  require(!c.strategies.empty(), "solver.strategies must not be empty");
  require(c.solver.outer_tol > 0.0 && c.solver.max_outer >= 1 && c.solver.max_inner >= 1,
          "solver tolerances and caps must be positive");
  require(c.time_cap > 0.0, "solver.time_cap must be positive");
  require(c.solver.amg.theta_C >= 0.0 && c.solver.amg.theta_C < 1.0, "amg.theta_C must lie in [0, 1)");
  require(c.solver.amg.theta_R >= 0.0 && c.solver.amg.theta_R < 1.0, "amg.theta_R must lie in [0, 1)");
  require(c.solver.amg.max_coarse >= 1 && c.solver.amg.max_levels >= 1, "amg level caps must be positive");
  require(!c.eig_dts.empty(), "eigs.dts must not be empty");
  for (double d : c.eig_dts) require(d > 0.0, "eigs.dts entries must be positive");
  require(c.eig_tol > 0.0 && c.eig_max_lanczos >= 2, "eigs.tol and eigs.max_lanczos must be positive");
  return c;
}

inline ExperimentConfig parse_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  return parse_config(in);
}

}  // namespace anisoheat
