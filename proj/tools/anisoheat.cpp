#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "anisoheat/experiments.hpp"

namespace fs = std::filesystem;
using namespace anisoheat;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNoConvergence = 2;

json config_json(const ExperimentConfig& c) {
  json j;
  j["mesh"] = {{"n", c.n},
               {"length", c.length},
               {"Lz", c.Lz},
               {"layers", c.layers},
               {"refine_layers", c.refine_layers},
               {"periodic_z", c.periodic_z},
               {"perturb", c.perturb},
               {"seed", c.mesh_seed},
               {"refinements", c.refinements},
               {"geometry", c.geometry}};
  j["physics"] = {{"kappa_perp", c.kappa_perp}, {"ratios", c.ratios},     {"dt", c.dt},
                  {"n_steps", c.n_steps},       {"kappa_bc", c.kappa_bc}, {"kappa_p", c.kappa_p},
                  {"kappa_p_aniso", c.kappa_p_aniso},
                  {"bc", c.bc == BoundaryKind::Dirichlet ? "dirichlet" : "neumann"}};
  std::vector<std::string> schemes, strategies;
  for (Scheme s : c.schemes) schemes.push_back(to_string(s));
  for (Strategy s : c.strategies) strategies.push_back(to_string(s));
  j["scheme"] = {{"schemes", schemes}};
  j["solver"] = {{"strategies", strategies},
                 {"outer_tol", c.solver.outer_tol},
                 {"max_outer", c.solver.max_outer},
                 {"max_inner", c.solver.max_inner},
                 {"inner_tol", c.solver.inner_tol},
                 {"upper_triangular", c.solver.upper_triangular},
                 {"time_cap", c.time_cap}};
  j["amg"] = {{"theta_C", c.solver.amg.theta_C},
              {"theta_R", c.solver.amg.theta_R},
              {"theta_classical", c.solver.amg.theta_classical},
              {"max_coarse", c.solver.amg.max_coarse},
              {"max_levels", c.solver.amg.max_levels},
              {"seed", c.solver.amg.seed}};
  std::vector<std::string> bm;
  for (bool b : c.eig_boundary_mass) bm.push_back(b ? "with" : "without");
  j["eigs"] = {{"dts", c.eig_dts},
               {"boundary_mass", bm},
               {"tol", c.eig_tol},
               {"max_lanczos", c.eig_max_lanczos},
               {"seed", c.eig_seed}};
  j["output"] = {{"dir", c.out_dir}};
  return j;
}

void write_manifest(const std::string& dir, const std::string& command, const std::string& config_path,
                    const ExperimentConfig& c, const std::vector<std::string>& outputs, int exit_code) {
  json m;
  m["command"] = command;
  m["config_file"] = config_path;
  m["config"] = config_json(c);
  m["version"] = ANISOHEAT_VERSION;
  m["compiler"] = __VERSION__;
  m["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  m["outputs"] = outputs;
  m["exit_code"] = exit_code;
  std::ofstream(dir + "/manifest.json") << m.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anisotropic heat flux experiments with the mixed upwind DG discretization"};
  app.require_subcommand(1);
  std::string config_path, out_override;
  const std::vector<std::string> names{"convergence", "solver-study", "eigs", "steady-aniso", "export-matrices"};
  const std::map<std::string, std::string> help{
      {"convergence", "spatial convergence on the helical steady state"},
      {"solver-study", "iteration counts of the block solvers on open field lines"},
      {"eigs", "largest eigenvalues of the preconditioned Schur complement components"},
      {"steady-aniso", "steady purely anisotropic solve via two transport solves"},
      {"export-matrices", "write assembled operators in Matrix Market format"}};
  for (const auto& n : names) {
    auto* sub = app.add_subcommand(n, help.at(n));
    sub->add_option("--config", config_path, "INI configuration file")->required();
    sub->add_option("--out", out_override, "output directory (overrides [output] dir)");
  }
  CLI11_PARSE(app, argc, argv);
  const std::string command = app.get_subcommands().front()->get_name();

  ExperimentConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  if (!out_override.empty()) cfg.out_dir = out_override;
  const std::string dir = cfg.out_dir;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    std::cerr << "cannot create output directory " << dir << ": " << ec.message() << "\n";
    return kExitConfig;
  }

  int code = kExitOk;
  std::vector<std::string> outputs;
  try {
    if (command == "convergence") {
      const auto rep = convergence_study(cfg, &std::cout);
      write_convergence_csv(rep, dir);
      outputs = {"convergence.csv", "convergence_orders.csv", "convergence_steps.csv"};
      for (const auto& o : rep.orders)
        std::cout << "order " << to_string(o.scheme) << " ratio=" << o.ratio << " r" << o.coarse << "->r" << o.fine
                  << ": " << o.order << "\n";
      if (!rep.all_completed()) code = kExitNoConvergence;
    } else if (command == "solver-study") {
      const auto rep = solver_study(cfg, &std::cout);
      write_solver_csv(rep, dir);
      outputs = {"solver_study.csv", "solver_steps.csv"};
      for (const auto& r : rep.rows)
        if (r.status == "failed") code = kExitNoConvergence;
    } else if (command == "eigs") {
      const auto rows = eigs_study(cfg, &std::cout);
      write_eigs_csv(rows, dir + "/eigs.csv");
      outputs = {"eigs.csv"};
      for (const auto& r : rows) {
        std::cout << r.geometry << " r" << r.refinement << " dt=" << r.dt << " ratio=" << r.ratio
                  << (r.boundary_mass ? " " : " no-M_BC ") << to_string(r.component) << ": " << r.estimate.lambda
                  << "\n";
        if (!r.estimate.converged) code = kExitNoConvergence;
      }
    } else if (command == "steady-aniso") {
      const auto rows = steady_aniso_study(cfg, &std::cout, dir);
      write_steady_csv(rows, dir);
      outputs = {"steady_aniso.csv"};
      for (const auto& r : rows)
        if (!r.converged) code = kExitNoConvergence;
    } else if (command == "export-matrices") {
      for (const auto& f : export_matrices(cfg, dir)) outputs.push_back(fs::path(f).filename().string());
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ConvergenceError& e) {
    std::cerr << "solver did not converge: " << e.what() << "\n";
    code = kExitNoConvergence;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    code = kExitConfig;
  }
  write_manifest(dir, command, config_path, cfg, outputs, code);
  std::cout << "wrote " << outputs.size() << " file(s) and manifest.json to " << dir << "\n";
  return code;
}
