#pragma once

// Experiment drivers behind the command line tool: convergence study, solver
// study, eigenvalue tables, steady purely anisotropic solve and matrix export.
// Each driver returns its table and can write it as CSV.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "anisoheat/config.hpp"
#include "anisoheat/problems.hpp"
#include "anisoheat/spectra.hpp"
#include "anisoheat/timeloop.hpp"

namespace anisoheat {

inline PrismMesh make_mesh(const ExperimentConfig& c, int refinement) {
  BaseMesh2d base = refine(build_base_mesh(c.n, c.length, c.perturb, c.mesh_seed), refinement);
  if (c.geometry == "2d") return PrismMesh::planar(std::move(base));
  return PrismMesh::extrude(std::move(base), c.refine_layers ? c.layers << refinement : c.layers, c.Lz, c.periodic_z);
}

/// Open-field-line problem in the configured geometry; 2D drops B_z.
inline MagneticField open_field(const ExperimentConfig& c) {
  return c.geometry == "2d" ? OpenFieldProblem{}.planar_field() : OpenFieldProblem{}.field();
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- convergence

struct ConvergenceRow {
  int refinement = 0;
  double ratio = 0.0;
  Scheme scheme = Scheme::MixedDg;
  double error = 0.0;  // relative L2 error averaged over the last two steps
  bool completed = true;
  double wall_time = 0.0;
  std::vector<StepRecord> steps;
};

struct ConvergenceOrder {
  double ratio = 0.0;
  Scheme scheme = Scheme::MixedDg;
  int coarse = 0;
  int fine = 0;
  double order = 0.0;  // log2(e_coarse / e_fine)
};

struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;
  std::vector<ConvergenceOrder> orders;
  bool all_completed() const {
    for (const auto& r : rows)
      if (!r.completed) return false;
    return true;
  }
  const ConvergenceRow* find(int refinement, double ratio, Scheme s) const {
    for (const auto& r : rows)
      if (r.refinement == refinement && r.ratio == ratio && r.scheme == s) return &r;
    return nullptr;
  }
};

/// Steady helical problem T = T0 with counter-forcing, integrated with the
/// direct solver over n_steps.
inline ConvergenceReport convergence_study(const ExperimentConfig& c, std::ostream* log = nullptr) {
  ConvergenceReport rep;
  const HelicalProblem hp{5.0, c.Lz};
  for (int r : c.refinements) {
    const PrismMesh mesh = make_mesh(c, r);
    const DgSpace space(mesh, 2);
    for (double ratio : c.ratios) {
      for (Scheme scheme : c.schemes) {
        TransientSetup s;
        s.space = &space;
        s.B = hp.field();
        s.pd = hp.data(ratio * c.kappa_perp, c.kappa_perp);
        s.pd.kappa_bc = c.kappa_bc;
        s.pd.kappa_p = c.kappa_p;
        s.T_init = HelicalProblem::T0;
        s.grad_T_init = HelicalProblem::grad_T0;
        s.exact = [](const Vec3& x, double) { return HelicalProblem::T0(x); };
        TimeLoopOptions opt;
        opt.scheme = scheme;
        opt.dt = c.dt;
        opt.n_steps = c.n_steps;
        opt.strategy = Strategy::Direct;
        opt.kappa_p_aniso = c.kappa_p_aniso;
        const auto t0 = std::chrono::steady_clock::now();
        const TransientResult res = run_transient(s, opt);
        ConvergenceRow row;
        row.refinement = r;
        row.ratio = ratio;
        row.scheme = scheme;
        row.error = res.final_error();
        row.completed = res.completed;
        row.wall_time = seconds_since(t0);
        row.steps = res.steps;
        if (log)
          *log << "convergence r=" << r << " ratio=" << ratio << " " << to_string(scheme) << " error=" << row.error
               << " (" << std::fixed << std::setprecision(1) << row.wall_time << std::defaultfloat
               << std::setprecision(6) << " s)" << std::endl;
        rep.rows.push_back(std::move(row));
      }
    }
  }
  for (std::size_t k = 0; k + 1 < c.refinements.size(); ++k) {
    for (double ratio : c.ratios) {
      for (Scheme scheme : c.schemes) {
        const auto* a = rep.find(c.refinements[k], ratio, scheme);
        const auto* b = rep.find(c.refinements[k + 1], ratio, scheme);
        ConvergenceOrder o;
        o.ratio = ratio;
        o.scheme = scheme;
        o.coarse = a->refinement;
        o.fine = b->refinement;
        o.order = std::log2(a->error / b->error) / (b->refinement - a->refinement);
        rep.orders.push_back(o);
      }
    }
  }
  return rep;
}

inline void write_convergence_csv(const ConvergenceReport& rep, const std::string& dir) {
  std::ofstream out(dir + "/convergence.csv");
  out << std::setprecision(10) << "refinement,ratio,scheme,error,completed,wall_time\n";
  for (const auto& r : rep.rows)
    out << r.refinement << "," << r.ratio << "," << to_string(r.scheme) << "," << r.error << "," << r.completed << ","
        << r.wall_time << "\n";
  std::ofstream ord(dir + "/convergence_orders.csv");
  ord << std::setprecision(10) << "ratio,scheme,coarse,fine,order\n";
  for (const auto& o : rep.orders)
    ord << o.ratio << "," << to_string(o.scheme) << "," << o.coarse << "," << o.fine << "," << o.order << "\n";
  std::ofstream st(dir + "/convergence_steps.csv");
  st << std::setprecision(10) << "refinement,ratio,scheme,step,time,error,outer,inner_first,inner_second,wall_time\n";
  for (const auto& r : rep.rows)
    for (const auto& s : r.steps)
      st << r.refinement << "," << r.ratio << "," << to_string(r.scheme) << "," << s.step << "," << s.time << ","
         << s.error << "," << s.outer_iterations << "," << s.inner_first << "," << s.inner_second << ","
         << s.wall_time << "\n";
}

// --------------------------------------------------------------- solver study

struct SolverRow {
  int refinement = 0;
  double ratio = 0.0;
  Strategy strategy = Strategy::Air;
  std::string status = "ok";  // ok | dnf (cap reached) | failed (no convergence)
  int steps_run = 0;
  TransientResult::Averages avg;
  double wall_time = 0.0;
  std::vector<StepRecord> steps;
};

struct SolverReport {
  std::vector<SolverRow> rows;
  const SolverRow* find(int refinement, double ratio, Strategy s) const {
    for (const auto& r : rows)
      if (r.refinement == refinement && r.ratio == ratio && r.strategy == s) return &r;
    return nullptr;
  }
};

/// Open-field-line problem, S = 0; statistics averaged over steps 2..5.
/// A run stops as "dnf" once it exceeds the time cap or an outer solve hits
/// max_outer.
inline SolverReport solver_study(const ExperimentConfig& c, std::ostream* log = nullptr) {
  SolverReport rep;
  const OpenFieldProblem op{7.5, c.Lz};
  for (int r : c.refinements) {
    const PrismMesh mesh = make_mesh(c, r);
    const DgSpace space(mesh, 2);
    for (Strategy strategy : c.strategies) {
      for (double ratio : c.ratios) {
        TransientSetup s;
        s.space = &space;
        s.B = open_field(c);
        s.pd = op.data(ratio * c.kappa_perp, c.kappa_perp);
        s.pd.kappa_bc = c.kappa_bc;
        s.pd.kappa_p = c.kappa_p;
        s.T_init = OpenFieldProblem::T0;
        s.grad_T_init = OpenFieldProblem::grad_T0;
        TimeLoopOptions opt;
        opt.dt = c.dt;
        opt.n_steps = c.n_steps;
        opt.strategy = strategy;
        opt.solver = c.solver;
        SolverRow row;
        row.refinement = r;
        row.ratio = ratio;
        row.strategy = strategy;
        const auto t0 = std::chrono::steady_clock::now();
        try {
          MixedDgStepper stepper(s, opt);
          for (int i = 0; i < c.n_steps; ++i) {
            const StepRecord rec = stepper.step();
            row.steps.push_back(rec);
            if (!rec.converged) {
              row.status = rec.outer_iterations >= c.solver.max_outer ? "dnf" : "failed";
              break;
            }
            if (seconds_since(t0) > c.time_cap) {
              if (i + 1 < c.n_steps) row.status = "dnf";
              break;
            }
          }
        } catch (const Error& e) {
          row.status = "failed";
          if (log) *log << "  " << e.what() << std::endl;
        }
        row.wall_time = seconds_since(t0);
        row.steps_run = static_cast<int>(row.steps.size());
        TransientResult tr;
        tr.steps = row.steps;
        row.avg = tr.averages(2, 5);
        if (log)
          *log << "solver-study r=" << r << " " << to_string(strategy) << " ratio=" << ratio << " " << row.status
               << " outer=" << row.avg.outer << " inner=" << row.avg.inner_total << " (" << std::fixed
               << std::setprecision(1) << row.wall_time << std::defaultfloat << std::setprecision(6) << " s)"
               << std::endl;
        rep.rows.push_back(std::move(row));
      }
    }
  }
  return rep;
}

inline void write_solver_csv(const SolverReport& rep, const std::string& dir) {
  std::ofstream out(dir + "/solver_study.csv");
  out << std::setprecision(10)
      << "refinement,ratio,strategy,status,steps_run,avg_outer,avg_inner_first,avg_inner_second,avg_inner_total,"
         "avg_step_time,wall_time\n";
  for (const auto& r : rep.rows)
    out << r.refinement << "," << r.ratio << "," << to_string(r.strategy) << "," << r.status << "," << r.steps_run
        << "," << r.avg.outer << "," << r.avg.inner_first << "," << r.avg.inner_second << "," << r.avg.inner_total
        << "," << r.avg.wall_time << "," << r.wall_time << "\n";
  std::ofstream st(dir + "/solver_steps.csv");
  st << std::setprecision(10)
     << "refinement,ratio,strategy,step,time,outer,inner_first,inner_second,wall_time,converged\n";
  for (const auto& r : rep.rows)
    for (const auto& s : r.steps)
      st << r.refinement << "," << r.ratio << "," << to_string(r.strategy) << "," << s.step << "," << s.time << ","
         << s.outer_iterations << "," << s.inner_first << "," << s.inner_second << "," << s.wall_time << ","
         << s.converged << "\n";
}

// ------------------------------------------------------------------- eigs

inline std::vector<EigsRow> eigs_study(const ExperimentConfig& c, std::ostream* log = nullptr) {
  EigsSettings s;
  s.dts = c.eig_dts;
  s.ratios = c.ratios;
  s.boundary_mass = c.eig_boundary_mass;
  s.kappa_perp = c.kappa_perp;
  s.kappa_bc = c.kappa_bc;
  s.kappa_p = c.kappa_p;
  s.tol = c.eig_tol;
  s.max_lanczos = c.eig_max_lanczos;
  s.seed = c.eig_seed;
  std::vector<EigsRow> rows;
  for (int r : c.refinements) {
    const PrismMesh mesh = make_mesh(c, r);
    const DgSpace space(mesh, 2);
    const auto t0 = std::chrono::steady_clock::now();
    auto part = eigs_table(space, open_field(c), c.geometry, r, s);
    if (log)
      *log << "eigs " << c.geometry << " r=" << r << ": " << part.size() << " values (" << std::fixed
           << std::setprecision(1) << seconds_since(t0) << std::defaultfloat << std::setprecision(6) << " s)"
           << std::endl;
    rows.insert(rows.end(), part.begin(), part.end());
  }
  return rows;
}

// ------------------------------------------------------------ steady aniso

struct SteadyRow {
  int refinement = 0;
  double kappa_par = 0.0;
  int outer = 0;
  int inner_solves = 0;
  long inner_first = 0;
  long inner_second = 0;
  double residual = 0.0;           // relative residual of the AIR solution
  double difference = 0.0;         // relative difference to the coupled direct solve
  bool converged = false;
};

/// kappa_perp = 0, no mass term: the swapped system is block triangular and
/// the preconditioner applies it exactly with two transport solves. The
/// entries of physics.ratios are used as kappa_par.
inline std::vector<SteadyRow> steady_aniso_study(const ExperimentConfig& c, std::ostream* log = nullptr,
                                                 const std::string& solution_dir = {}) {
  std::vector<SteadyRow> rows;
  const OpenFieldProblem op{7.5, c.Lz};
  for (int r : c.refinements) {
    const PrismMesh mesh = make_mesh(c, r);
    const DgSpace space(mesh, 2);
    const MagneticField B = open_field(c);
    const AssembledOperators ops = assemble_operators(space, B, c.kappa_p);
    for (double kpar : c.ratios) {
      SystemParams p;
      p.kappa_par = kpar;
      p.kappa_perp = 0.0;
      p.kappa_bc = c.kappa_bc;
      p.mass_coeff = 0.0;
      const AssembledSystem sys = build_system(ops, p);
      ProblemData pd = op.data(kpar, 0.0);
      pd.kappa_bc = c.kappa_bc;
      const double skd = std::sqrt(pd.kappa_delta());
      const FieldVector inflow = project(space, [&](const Vec3& x) {
        return skd * B.b(x).dot(OpenFieldProblem::grad_T0(x));
      });
      const LoadVectors F = assemble_rhs(space, B, pd, inflow, 0.0, std::numeric_limits<double>::infinity());

      BlockSolverOptions bo = c.solver;
      if (bo.inner_tol <= 0.0) bo.inner_tol = 1e-12;
      AirBlockSolver air(sys, bo);
      const BlockSolution sol = air.solve(F.F_T, F.F_zeta);
      const BlockSolution ref = DirectBlockSolver(sys).solve(F.F_T, F.F_zeta);

      SteadyRow row;
      row.refinement = r;
      row.kappa_par = kpar;
      row.outer = sol.outer.iterations;
      row.inner_solves = sol.inner_solves;
      row.inner_first = sol.inner_first;
      row.inner_second = sol.inner_second;
      row.converged = sol.converged();
      Vector yT, yz;
      sys.apply(sol.T, sol.zeta, yT, yz);
      row.residual = std::hypot((yT - F.F_T).norm(), (yz - F.F_zeta).norm()) /
                     std::hypot(F.F_T.norm(), F.F_zeta.norm());
      row.difference = std::hypot((sol.T - ref.T).norm(), (sol.zeta - ref.zeta).norm()) /
                       std::hypot(ref.T.norm(), ref.zeta.norm());
      if (!solution_dir.empty()) {
        std::ofstream out(solution_dir + "/steady_T_r" + std::to_string(r) + "_kpar" + std::to_string(kpar) + ".csv");
        out << std::setprecision(17) << "dof,T,zeta\n";
        for (Eigen::Index i = 0; i < sol.T.size(); ++i) out << i << "," << sol.T[i] << "," << sol.zeta[i] << "\n";
      }
      if (log)
        *log << "steady-aniso r=" << r << " kappa_par=" << kpar << " outer=" << row.outer
             << " inner_solves=" << row.inner_solves << " difference=" << row.difference << std::endl;
      rows.push_back(row);
    }
  }
  return rows;
}

inline void write_steady_csv(const std::vector<SteadyRow>& rows, const std::string& dir) {
  std::ofstream out(dir + "/steady_aniso.csv");
  out << std::setprecision(10)
      << "refinement,kappa_par,outer,inner_solves,inner_first,inner_second,residual,difference,converged\n";
  for (const auto& r : rows)
    out << r.refinement << "," << r.kappa_par << "," << r.outer << "," << r.inner_solves << "," << r.inner_first << ","
        << r.inner_second << "," << r.residual << "," << r.difference << "," << r.converged << "\n";
}

// ---------------------------------------------------------- matrix export

/// Matrix Market files of the assembled operators and the mixed system of the
/// first configured refinement and ratio.
inline std::vector<std::string> export_matrices(const ExperimentConfig& c, const std::string& dir) {
  const int r = c.refinements.front();
  const PrismMesh mesh = make_mesh(c, r);
  const DgSpace space(mesh, 2);
  const AssembledOperators ops = assemble_operators(space, open_field(c), c.kappa_p, c.bc);
  SystemParams p;
  p.kappa_perp = c.kappa_perp;
  p.kappa_par = c.ratios.front() * c.kappa_perp;
  p.kappa_bc = c.kappa_bc;
  p.mass_coeff = 2.0 / c.dt;
  p.kind = c.bc;
  const AssembledSystem sys = build_system(ops, p);
  const std::vector<std::pair<std::string, const BlockCsrMatrix*>> mats{
      {"M", &ops.M},       {"M_BC_he", &ops.M_BC_he}, {"M_BC_heinv", &ops.M_BC_heinv},
      {"L", &ops.L},       {"G", &ops.G},             {"A_TT", &sys.A_TT},
      {"A_Tz", &sys.A_Tz}, {"A_zT", &sys.A_zT},       {"A_zz", &sys.A_zz}};
  std::vector<std::string> files;
  for (const auto& [name, m] : mats) {
    const std::string path = dir + "/" + name + ".mtx";
    write_matrix_market(*m, path);
    files.push_back(path);
  }
  return files;
}

}  // namespace anisoheat
