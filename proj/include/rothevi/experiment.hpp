#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <mutex>
#include <thread>
#include <vector>

#include "rothevi/config.hpp"
#include "rothevi/estimates.hpp"
#include "rothevi/thinlayer.hpp"

namespace rothevi {

// ROTHE_THREADS caps sweep parallelism; 0 or unset runs members sequentially.
inline int sweep_thread_cap() {
  const char* env = std::getenv("ROTHE_THREADS");
  if (!env) return 0;
  char* end = nullptr;
  long v = std::strtol(env, &end, 10);
  if (end == env || v < 0) return 0;
  return static_cast<int>(v);
}

// Run f(0..count-1), possibly on a small worker pool. Member outputs go to
// index-addressed slots, so results are deterministic either way.
template <typename F>
void for_each_member(int count, F&& f) {
  const int cap = sweep_thread_cap();
  if (cap <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (int i; (i = next.fetch_add(1)) < count;) {
      try {
        f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const int workers = std::min(cap, count);
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

inline void write_trajectory_csv(const std::string& path, const RotheTrajectory& traj) {
  CsvWriter w(path, {"step", "t", "dof_id", "value"});
  for (int i = 0; i < static_cast<int>(traj.steps.size()); ++i)
    for (Eigen::Index d = 0; d < traj.steps[i].size(); ++d)
      w.row({CsvWriter::cell(i), CsvWriter::cell(traj.time_of(i)),
             CsvWriter::cell(static_cast<long>(d)), CsvWriter::cell(traj.steps[i][d])});
}

inline void write_interface_csv(const std::string& path, const RotheTrajectory& traj,
                                const std::vector<int>& iface_nodes) {
  CsvWriter w(path, {"step", "t", "node_id", "trace_or_jump"});
  for (int i = 0; i < static_cast<int>(traj.interface_series.size()); ++i)
    for (Eigen::Index k = 0; k < traj.interface_series[i].size(); ++k)
      w.row({CsvWriter::cell(i), CsvWriter::cell(traj.time_of(i)),
             CsvWriter::cell(iface_nodes[k]), CsvWriter::cell(traj.interface_series[i][k])});
}

namespace detail {

inline RotheTrajectory run_problem(ProblemKind problem, const BidomainMesh& mesh,
                                   const DofMap& dm, const ProblemData& data) {
  return problem == ProblemKind::Wentzell ? run_wentzell(mesh, dm, data)
                                          : run_signorini(mesh, dm, data);
}

}  // namespace detail

// Executes the configured experiment; returns the list of files written.
inline std::vector<std::string> run_experiment(const RunConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  auto in_dir = [&](const std::string& name) { return cfg.out_dir + "/" + name; };
  std::vector<std::string> files;

  BidomainMesh mesh = cfg.build_mesh();
  mesh.audit();
  if (cfg.dump_mesh) {
    mesh.dump_csv(in_dir("nodes.csv"), in_dir("elements.csv"));
    files.push_back(in_dir("nodes.csv"));
    files.push_back(in_dir("elements.csv"));
  }

  switch (cfg.kind) {
    case ExperimentKind::Wentzell:
    case ExperimentKind::Signorini: {
      const ProblemKind problem = cfg.kind == ExperimentKind::Wentzell
                                      ? ProblemKind::Wentzell
                                      : ProblemKind::Signorini;
      DofMap dm = build_dof_map(mesh, problem == ProblemKind::Wentzell
                                          ? DofMode::Continuous
                                          : DofMode::Bilateral);
      ProblemData data = cfg.data_spec().instantiate(mesh, dm);
      RotheTrajectory traj = detail::run_problem(problem, mesh, dm, data);
      EstimateReport rep = check_estimates(traj, mesh, dm, data);
      write_trajectory_csv(in_dir("trajectory.csv"), traj);
      write_interface_csv(in_dir("interface.csv"), traj, mesh.interface_nodes());
      rep.write_csv(in_dir("estimates.csv"));
      files.insert(files.end(), {in_dir("trajectory.csv"), in_dir("interface.csv"),
                                 in_dir("estimates.csv")});
      break;
    }

    case ExperimentKind::MSweep: {
      DofMap dm = build_dof_map(mesh, cfg.problem == ProblemKind::Wentzell
                                          ? DofMode::Continuous
                                          : DofMode::Bilateral);
      long m_ref = cfg.m_ref > 0 ? cfg.m_ref : 8 * *std::max_element(cfg.m_list.begin(),
                                                                     cfg.m_list.end());
      DataSpec base = cfg.data_spec();
      DataSpec ref_spec = base;
      ref_spec.m = static_cast<int>(m_ref);
      ProblemData ref_data = ref_spec.instantiate(mesh, dm);
      RotheTrajectory ref = detail::run_problem(cfg.problem, mesh, dm, ref_data);

      const int count = static_cast<int>(cfg.m_list.size());
      std::vector<TrajectoryDistance> dist(count);
      std::vector<EstimateReport> reps(count);
      for_each_member(count, [&](int i) {
        DataSpec member = base;
        member.m = static_cast<int>(cfg.m_list[i]);
        if (m_ref % member.m != 0)
          throw std::invalid_argument("msweep: m_ref must be a multiple of every m");
        ProblemData data = member.instantiate(mesh, dm);
        RotheTrajectory traj = detail::run_problem(cfg.problem, mesh, dm, data);
        dist[i] = trajectory_norms(traj, ref, mesh);
        reps[i] = check_estimates(traj, mesh, dm, data);
        write_interface_csv(in_dir("interface_m" + std::to_string(member.m) + ".csv"), traj,
                            mesh.interface_nodes());
      });
      CsvWriter w(in_dir("convergence.csv"),
                  {"m", "h", "dist_l2sigma", "deriv_sq_sigma", "sup_deriv_gamma"});
      for (int i = 0; i < count; ++i)
        w.row({CsvWriter::cell(cfg.m_list[i]), CsvWriter::cell(cfg.T / cfg.m_list[i]),
               CsvWriter::cell(dist[i].l2_sigma), CsvWriter::cell(reps[i].deriv_sq_sigma),
               CsvWriter::cell(reps[i].sup_deriv_gamma)});
      files.push_back(in_dir("convergence.csv"));
      for (long mm : cfg.m_list)
        files.push_back(in_dir("interface_m" + std::to_string(mm) + ".csv"));
      break;
    }

    case ExperimentKind::Estimates: {
      DofMap dm = build_dof_map(mesh, cfg.problem == ProblemKind::Wentzell
                                          ? DofMode::Continuous
                                          : DofMode::Bilateral);
      DataSpec base = cfg.data_spec();
      const int count = static_cast<int>(cfg.m_list.size());
      std::vector<EstimateReport> reps(count);
      for_each_member(count, [&](int i) {
        DataSpec member = base;
        member.m = static_cast<int>(cfg.m_list[i]);
        ProblemData data = member.instantiate(mesh, dm);
        RotheTrajectory traj = detail::run_problem(cfg.problem, mesh, dm, data);
        reps[i] = check_estimates(traj, mesh, dm, data);
        reps[i].write_csv(in_dir("estimates_m" + std::to_string(member.m) + ".csv"));
      });
      {
        CsvWriter w(in_dir("estimates_sweep.csv"),
                    {"m", "explicit_bounds_pass", "max_interface_ratio", "ui2_ratio",
                     "deriv_sq_sigma", "sup_deriv_gamma"});
        for (int i = 0; i < count; ++i)
          w.row({CsvWriter::cell(cfg.m_list[i]), CsvWriter::cell(reps[i].explicit_bounds_pass),
                 CsvWriter::cell(reps[i].max_interface_ratio),
                 CsvWriter::cell(reps[i].ui2_ratio), CsvWriter::cell(reps[i].deriv_sq_sigma),
                 CsvWriter::cell(reps[i].sup_deriv_gamma)});
      }
      {
        // Boundedness flags across the sweep: generic-constant inequalities
        // must not grow by more than 10% from the coarsest to the finest run.
        std::vector<double> ui2, deriv, iface_ratio;
        for (const auto& r : reps) {
          ui2.push_back(r.ui2_ratio);
          deriv.push_back(cfg.problem == ProblemKind::Wentzell ? r.deriv_sq_sigma
                                                               : r.sup_deriv_gamma);
          iface_ratio.push_back(r.max_interface_ratio);
        }
        CsvWriter w(in_dir("estimates_flags.csv"),
                    {"quantity", "first", "last", "growth", "bounded"});
        auto flag_row = [&](const std::string& name, const std::vector<double>& v) {
          double growth = relative_growth(v.front(), v.back());
          w.row({name, CsvWriter::cell(v.front()), CsvWriter::cell(v.back()),
                 CsvWriter::cell(growth), CsvWriter::cell(growth <= 0.10)});
        };
        flag_row("derivative_bound_ratio", ui2);
        flag_row("derivative_norm", deriv);
        if (cfg.problem == ProblemKind::Signorini) flag_row("jump_norm_ratio", iface_ratio);
      }
      files.push_back(in_dir("estimates_sweep.csv"));
      files.push_back(in_dir("estimates_flags.csv"));
      for (long mm : cfg.m_list)
        files.push_back(in_dir("estimates_m" + std::to_string(mm) + ".csv"));
      break;
    }

    case ExperimentKind::ThinLayer: {
      DataSpec base = cfg.data_spec();
      // reference run (beta = 0 continuous problem on the same inclusion mesh)
      DofMap ref_dm = build_dof_map(mesh, DofMode::Continuous);
      ProblemData ref_data = base.instantiate(mesh, ref_dm);
      RotheTrajectory ref = run_wentzell(mesh, ref_dm, ref_data);
      std::vector<double> lengths = mesh.interface_lumped_lengths();

      const int count = static_cast<int>(cfg.eps_list.size());
      std::vector<ThinLayerRow> rows(count);
      for_each_member(count, [&](int i) {
        double eps = cfg.eps_list[i];
        LayerMesh lmesh = build_layer_mesh(static_cast<int>(cfg.n), eps, cfg.gamma);
        DofMap dm = build_dof_map(lmesh.mesh, DofMode::Continuous);
        ProblemData data = base.instantiate(lmesh.mesh, dm);
        data.u0 = lift_layer_datum(lmesh, dm, data.S);
        RotheTrajectory traj = run_perturbed(lmesh, dm, data);
        double acc = 0.0, norm_bound = 0.0;
        InterfaceMass band = layer_mass(lmesh, dm);
        for (int s = 0; s <= data.m; ++s) {
          const double theta = (s == 0 || s == data.m) ? 0.5 : 1.0;
          Vec diff = layer_average(lmesh, dm, traj.steps[s]) - ref.interface_series[s];
          double sq = 0;
          for (Eigen::Index k = 0; k < diff.size(); ++k) sq += lengths[k] * diff[k] * diff[k];
          acc += theta * data.h() * sq;
          double band_sq = 0;
          for (int k = 0; k < band.selector.size(); ++k) {
            double v = band.selector.value(traj.steps[s], k);
            band_sq += band.weights[k] * v * v;
          }
          norm_bound = std::max(norm_bound, band_sq);
        }
        rows[i] = {eps, lmesh.band_cells[kLeft], std::sqrt(acc), norm_bound};
        write_interface_csv(in_dir("interface_eps" + std::to_string(i) + ".csv"), traj,
                            lmesh.mesh.interface_nodes());
      });
      CsvWriter w(in_dir("thinlayer.csv"), {"epsilon", "band_width_cells",
                                            "distance_L2SigmaGamma", "layer_norm_bound"});
      for (const auto& r : rows)
        w.row({CsvWriter::cell(r.epsilon), CsvWriter::cell(r.band_width_cells),
               CsvWriter::cell(r.distance), CsvWriter::cell(r.layer_norm_bound)});
      files.push_back(in_dir("thinlayer.csv"));
      for (int i = 0; i < count; ++i)
        files.push_back(in_dir("interface_eps" + std::to_string(i) + ".csv"));
      break;
    }

    case ExperimentKind::Poincare: {
      const int count = static_cast<int>(cfg.n_list.size());
      std::vector<double> cvals(count);
      for_each_member(count, [&](int i) {
        BidomainMesh m = build_inclusion_mesh(static_cast<int>(cfg.n_list[i]));
        DofMap dm = build_dof_map(m, DofMode::Bilateral);
        cvals[i] = poincare_constant(m, dm);
      });
      CsvWriter w(in_dir("poincare.csv"), {"n", "c"});
      for (int i = 0; i < count; ++i)
        w.row({CsvWriter::cell(cfg.n_list[i]), CsvWriter::cell(cvals[i])});
      files.push_back(in_dir("poincare.csv"));
      break;
    }
  }
  return files;
}

}  // namespace rothevi
