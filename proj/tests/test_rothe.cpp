#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>

#include "rothevi/estimates.hpp"
#include "rothevi/stepping.hpp"

using namespace rothevi;

namespace {

// small Wentzell setup on the strip
struct WentzellFixture {
  BidomainMesh mesh;
  DofMap dm;
  DataSpec spec;

  explicit WentzellFixture(int nx = 2, int ny = 2) {
    mesh = build_strip_mesh(nx, nx, ny);
    dm = build_dof_map(mesh, DofMode::Continuous);
    spec.sigma1 = 2.0;
    spec.sigma2 = 0.5;
    spec.alpha = 1.0;
    spec.beta = 0.1;
    spec.T = 0.5;
    spec.m = 4;
    spec.tol = 1e-30;
    spec.S_kind = InitKind::SinProfile;
    spec.S_amplitude = 1.0;
  }

  ProblemData data() const { return spec.instantiate(mesh, dm); }
};

struct SignoriniFixture {
  BidomainMesh mesh;
  DofMap dm;
  DataSpec spec;

  explicit SignoriniFixture(int n = 4) {
    mesh = build_inclusion_mesh(n);
    dm = build_dof_map(mesh, DofMode::Bilateral);
    spec.sigma1 = 1.0;
    spec.sigma2 = 2.0;
    spec.alpha = 1.0;
    spec.beta = 0.0;
    spec.T = 0.5;
    spec.m = 4;
    spec.tol = 1e-30;
    spec.S_kind = InitKind::SinProfile;
    spec.S_amplitude = 0.8;
  }

  ProblemData data() const { return spec.instantiate(mesh, dm); }
};

double lumped_interface_norm(const BidomainMesh& mesh, const Vec& iface, double alpha) {
  std::vector<double> lengths = mesh.interface_lumped_lengths();
  double s = 0;
  for (Eigen::Index k = 0; k < iface.size(); ++k) s += alpha * lengths[k] * iface[k] * iface[k];
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("zero data is a fixed point") {
  WentzellFixture wf;
  wf.spec.S_kind = InitKind::Zero;
  for (JSpec j : {JSpec::zero(), JSpec::abs_val(1.0), JSpec::positive_part(2.0)}) {
    wf.spec.j = j;
    RotheTrajectory tr = run_wentzell(wf.mesh, wf.dm, wf.data());
    for (const Vec& u : tr.steps) CHECK(u.cwiseAbs().maxCoeff() == 0.0);
  }
  SignoriniFixture sf;
  sf.spec.S_kind = InitKind::Zero;
  RotheTrajectory tr = run_signorini(sf.mesh, sf.dm, sf.data());
  for (const Vec& u : tr.steps) CHECK(u.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("linear steps match a dense direct factorization") {
  SECTION("wentzell on strip(2,2,2)") {
    WentzellFixture wf;
    wf.spec.f_kind = SourceKind::SinXY;
    wf.spec.f_amplitude = 2.0;
    ProblemData data = wf.data();
    StepOperator op = StepOperator::wentzell(wf.mesh, wf.dm, data);
    Eigen::MatrixXd Ad(op.matrix());
    Vec u = data.u0;
    for (int i = 1; i <= data.m; ++i) {
      Vec b = op.rhs(u, data.h() * i);
      Vec direct = Ad.ldlt().solve(b);
      u = op.step(u, data.h() * i);
      CHECK((u - direct).norm() <= 1e-9 * (1.0 + direct.norm()));
    }
  }
  SECTION("signorini on inclusion(4)") {
    SignoriniFixture sf;
    sf.spec.f_kind = SourceKind::Constant;
    sf.spec.f_amplitude = 1.0;
    sf.spec.g_kind = SourceKind::Constant;
    sf.spec.g_amplitude = 0.5;
    ProblemData data = sf.data();
    StepOperator op = StepOperator::signorini(sf.mesh, sf.dm, data);
    Eigen::MatrixXd Ad(op.matrix());
    Vec u = data.u0;
    for (int i = 1; i <= data.m; ++i) {
      Vec b = op.rhs(u, data.h() * i);
      Vec direct = Ad.ldlt().solve(b);
      u = op.step(u, data.h() * i);
      CHECK((u - direct).norm() <= 1e-9 * (1.0 + direct.norm()));
    }
  }
}

TEST_CASE("sourceless runs contract the interface norm at every step") {
  std::vector<JSpec> js = {JSpec::zero(), JSpec::abs_val(0.7), JSpec::positive_part(1.3),
                           JSpec::quadratic(0.4), JSpec::interval(-2.0, 2.0)};
  for (const JSpec& j : js) {
    WentzellFixture wf;
    wf.spec.j = j;
    RotheTrajectory tr = run_wentzell(wf.mesh, wf.dm, wf.data());
    for (int i = 1; i <= tr.m; ++i) {
      double cur = lumped_interface_norm(wf.mesh, tr.interface_series[i], wf.spec.alpha);
      double prev = lumped_interface_norm(wf.mesh, tr.interface_series[i - 1], wf.spec.alpha);
      CHECK(cur <= prev + 1e-12 * (1.0 + prev));
    }
  }
  for (const JSpec& j : js) {
    SignoriniFixture sf;
    sf.spec.j = j;
    RotheTrajectory tr = run_signorini(sf.mesh, sf.dm, sf.data());
    for (int i = 1; i <= tr.m; ++i) {
      double cur = lumped_interface_norm(sf.mesh, tr.interface_series[i], sf.spec.alpha);
      double prev = lumped_interface_norm(sf.mesh, tr.interface_series[i - 1], sf.spec.alpha);
      CHECK(cur <= prev + 1e-12 * (1.0 + prev));
    }
  }
}

TEST_CASE("signorini steps satisfy the subdifferential inclusion") {
  SignoriniFixture sf;
  sf.spec.j = JSpec::positive_part(0.8);
  sf.spec.g_kind = SourceKind::Constant;
  sf.spec.g_amplitude = 0.4;
  ProblemData data = sf.data();
  StepOperator op = StepOperator::signorini(sf.mesh, sf.dm, data);
  const InterfaceMass& im = op.interface_mass();
  Vec u = data.u0;
  for (int i = 1; i <= data.m; ++i) {
    Vec b = op.rhs(u, data.h() * i);
    u = op.step(u, data.h() * i);
    Vec res = b - op.matrix() * u;
    for (int k = 0; k < im.selector.size(); ++k) {
      const auto& e = im.selector.entries[k];
      double rk = res[e.dof_pos];
      auto [lo, hi] = data.j.subdifferential(im.selector.value(u, k));
      CHECK(rk >= im.weights[k] * lo - 1e-8);
      CHECK(rk <= im.weights[k] * hi + 1e-8);
      // side-1 residual mirrors side-2
      CHECK(std::abs(res[e.dof_neg] + rk) <= 1e-8);
    }
  }
}

TEST_CASE("signorini coercivity gate") {
  SignoriniFixture sf;
  sf.spec.sigma1 = 1.0;
  sf.spec.sigma2 = 4.0;
  sf.spec.alpha = 0.1;
  sf.spec.T = 1.0;
  // sigma_min*T/alpha = 10
  CHECK(signorini_min_steps(1.0, 0.1, 1.0) == 10);
  sf.spec.m = 5;
  try {
    run_signorini(sf.mesh, sf.dm, sf.data());
    FAIL("expected CoercivityError");
  } catch (const CoercivityError& e) {
    CHECK(e.minimal_m == 10);
  }
  sf.spec.m = 10;
  CHECK_NOTHROW(run_signorini(sf.mesh, sf.dm, sf.data()));
}

TEST_CASE("m = 1 reduces to a single step call") {
  WentzellFixture wf;
  wf.spec.m = 1;
  wf.spec.f_kind = SourceKind::Constant;
  ProblemData data = wf.data();
  RotheTrajectory tr = run_wentzell(wf.mesh, wf.dm, data);
  Vec single = wentzell_step(wf.mesh, wf.dm, data, data.u0, data.T);
  REQUIRE(tr.steps.size() == 2);
  CHECK((tr.steps[1] - single).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("trajectory invariants") {
  WentzellFixture wf;
  wf.spec.f_kind = SourceKind::LinearT;
  ProblemData data = wf.data();
  RotheTrajectory tr = run_wentzell(wf.mesh, wf.dm, data);

  SECTION("interpolant is exact at the time nodes") {
    for (int i = 0; i <= tr.m; ++i)
      CHECK((tr.at_time(tr.time_of(i)) - tr.steps[i]).cwiseAbs().maxCoeff() <= 1e-14);
  }
  SECTION("telescoping of the discrete derivative") {
    Vec acc = tr.interface_series[0];
    for (const Vec& z : tr.derivative_series) acc += tr.h * z;
    CHECK((acc - tr.interface_series[tr.m]).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SECTION("step zero reproduces the initial interface datum") {
    CHECK((tr.interface_series[0] - data.S).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("time samples") {
  BidomainMesh mesh = build_strip_mesh(1, 1, 1);
  DofMap full = build_dof_map(mesh, DofMode::Continuous, /*keep_dirichlet=*/true);
  TimeSamples f;
  f.times = {0.0, 1.0};
  f.values = {Vec::Zero(mesh.n_nodes()), Vec::Constant(mesh.n_nodes(), 2.0)};

  SECTION("evaluation outside the sampled interval is a range error") {
    CHECK_THROWS_AS(f.at(-0.1), std::out_of_range);
    CHECK_THROWS_AS(f.at(1.5), std::out_of_range);
    CHECK_NOTHROW(f.at(0.0));
    CHECK_NOTHROW(f.at(1.0));
  }
  SECTION("a source linear in time loads linearly in time") {
    Vec mid = assemble_load(mesh, full, f.at(0.5));
    Vec avg = 0.5 * (assemble_load(mesh, full, f.at(0.0)) +
                     assemble_load(mesh, full, f.at(1.0)));
    CHECK((mid - avg).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK(mid.sum() == Catch::Approx(2.0));  // f = 1 at t = 1/2, area 2
  }
}

TEST_CASE("compatibility residual") {
  SECTION("all-zero data is compatible for every catalog j") {
    for (JSpec j : {JSpec::zero(), JSpec::abs_val(1.0), JSpec::positive_part(1.0),
                    JSpec::quadratic(1.0), JSpec::interval(-1.0, 1.0)}) {
      WentzellFixture wf;
      wf.spec.S_kind = InitKind::Zero;
      wf.spec.j = j;
      CHECK(compatibility_residual(wf.mesh, wf.dm, wf.data()) == 0.0);
    }
  }
  SECTION("a stationary pre-solve is compatible") {
    WentzellFixture wf;
    wf.spec.S_kind = InitKind::Zero;
    wf.spec.f_kind = SourceKind::SinXY;
    wf.spec.f_amplitude = 1.5;
    ProblemData data = wf.data();
    // dense stationary oracle: A0 u0 = b(0)
    SpMat A0s = assemble_stiffness(wf.mesh, wf.dm, data.sigma1, data.sigma2);
    A0s += assemble_tangential_stiffness(wf.mesh, wf.dm, data.beta);
    Eigen::MatrixXd A0(A0s);
    data.u0 = A0.ldlt().solve(assemble_load(wf.mesh, wf.dm, data.f.at(0.0)));
    InterfaceMass im = assemble_interface_mass(wf.mesh, wf.dm, data.alpha);
    data.S = im.selector.apply(data.u0);
    CHECK(compatibility_residual(wf.mesh, wf.dm, data) <= 1e-9);

    SECTION("and an incompatible u0 is flagged") {
      std::mt19937 rng(9);
      std::normal_distribution<double> gauss;
      for (int i = 0; i < data.u0.size(); ++i) data.u0[i] += 0.5 * gauss(rng);
      data.S = im.selector.apply(data.u0);
      CHECK(compatibility_residual(wf.mesh, wf.dm, data) > 1e-6);
    }
  }
}

TEST_CASE("regularity diagnostics") {
  SECTION("constant-in-time source, linear problem: derivative norms decay") {
    WentzellFixture wf;
    wf.spec.f_kind = SourceKind::SinXY;
    wf.spec.m = 6;
    ProblemData data = wf.data();  // u0 is the lift of S, not stationary
    RotheTrajectory tr = run_wentzell(wf.mesh, wf.dm, data);
    RegularityReport rep = regularity_diagnostics(tr, wf.mesh, wf.dm, data);
    for (std::size_t i = 1; i < rep.deriv_norm_gamma.size(); ++i)
      CHECK(rep.deriv_norm_gamma[i] <=
            rep.deriv_norm_gamma[i - 1] + 1e-10 * (1.0 + rep.deriv_norm_gamma[i - 1]));
  }
  SECTION("zero data gives identically zero derivative norms") {
    WentzellFixture wf;
    wf.spec.S_kind = InitKind::Zero;
    ProblemData data = wf.data();
    RotheTrajectory tr = run_wentzell(wf.mesh, wf.dm, data);
    RegularityReport rep = regularity_diagnostics(tr, wf.mesh, wf.dm, data);
    CHECK(rep.guaranteed);
    CHECK(rep.sup_gamma == 0.0);
    CHECK(rep.sup_energy == 0.0);
  }
}

TEST_CASE("trajectory norms") {
  WentzellFixture wf;
  wf.spec.f_kind = SourceKind::SinXY;
  wf.spec.m = 8;

  SECTION("distance to itself is zero, symmetry holds") {
    RotheTrajectory tr = run_wentzell(wf.mesh, wf.dm, wf.data());
    CHECK(trajectory_norms(tr, tr, wf.mesh).l2_sigma == 0.0);
  }
  SECTION("triangle inequality across three runs") {
    wf.spec.j = JSpec::zero();
    RotheTrajectory a = run_wentzell(wf.mesh, wf.dm, wf.data());
    wf.spec.j = JSpec::abs_val(0.5);
    RotheTrajectory b = run_wentzell(wf.mesh, wf.dm, wf.data());
    wf.spec.j = JSpec::quadratic(0.7);
    RotheTrajectory c = run_wentzell(wf.mesh, wf.dm, wf.data());
    double ab = trajectory_norms(a, b, wf.mesh).l2_sigma;
    double bc = trajectory_norms(b, c, wf.mesh).l2_sigma;
    double ac = trajectory_norms(a, c, wf.mesh).l2_sigma;
    CHECK(ac <= ab + bc + 1e-12);
  }
  SECTION("m-refinement converges to a fine reference") {
    wf.spec.tol = 1e-14;
    DataSpec ref_spec = wf.spec;
    ref_spec.m = 64;
    RotheTrajectory ref = run_wentzell(wf.mesh, wf.dm, ref_spec.instantiate(wf.mesh, wf.dm));
    double prev = kInf;
    for (int m : {4, 8, 16}) {
      DataSpec s = wf.spec;
      s.m = m;
      RotheTrajectory tr = run_wentzell(wf.mesh, wf.dm, s.instantiate(wf.mesh, wf.dm));
      double d = trajectory_norms(tr, ref, wf.mesh).l2_sigma;
      CHECK(d < prev);
      prev = d;
    }
  }
  SECTION("incompatible grids are rejected") {
    RotheTrajectory a = run_wentzell(wf.mesh, wf.dm, wf.data());
    DataSpec s = wf.spec;
    s.m = 12;  // 12 is not a multiple of 8
    RotheTrajectory b = run_wentzell(wf.mesh, wf.dm, s.instantiate(wf.mesh, wf.dm));
    CHECK_THROWS_AS(trajectory_norms(a, b, wf.mesh), std::invalid_argument);
  }
}

TEST_CASE("estimate report") {
  SECTION("sourceless wentzell: explicit interface bound holds at every step") {
    WentzellFixture wf;
    wf.spec.j = JSpec::positive_part(0.6);
    ProblemData data = wf.data();
    RotheTrajectory tr = run_wentzell(wf.mesh, wf.dm, data);
    EstimateReport rep = check_estimates(tr, wf.mesh, wf.dm, data);
    CHECK(rep.explicit_bounds_pass);
    bool saw_bound = false, saw_contraction = false;
    for (const auto& r : rep.rows) {
      if (r.id == "interface_norm_bound") {
        saw_bound = true;
        CHECK(r.pass);
      }
      if (r.id == "interface_norm_contraction") saw_contraction = true;
    }
    CHECK(saw_bound);
    CHECK(saw_contraction);
  }
  SECTION("all-zero data gives identically zero left-hand sides") {
    WentzellFixture wf;
    wf.spec.S_kind = InitKind::Zero;
    ProblemData data = wf.data();
    RotheTrajectory tr = run_wentzell(wf.mesh, wf.dm, data);
    EstimateReport rep = check_estimates(tr, wf.mesh, wf.dm, data);
    for (const auto& r : rep.rows) CHECK(r.lhs == 0.0);
  }
  SECTION("wentzell with a source: explicit bounds still pass") {
    WentzellFixture wf;
    wf.spec.f_kind = SourceKind::SinXY;
    wf.spec.f_amplitude = 3.0;
    wf.spec.j = JSpec::abs_val(0.5);
    ProblemData data = wf.data();
    RotheTrajectory tr = run_wentzell(wf.mesh, wf.dm, data);
    EstimateReport rep = check_estimates(tr, wf.mesh, wf.dm, data);
    CHECK(rep.explicit_bounds_pass);
    CHECK(rep.lipschitz_f == 0.0);  // constant-in-time source
  }
  SECTION("signorini ratios are finite and reported") {
    SignoriniFixture sf;
    sf.spec.f_kind = SourceKind::Constant;
    sf.spec.g_kind = SourceKind::LinearT;
    ProblemData data = sf.data();
    RotheTrajectory tr = run_signorini(sf.mesh, sf.dm, data);
    EstimateReport rep = check_estimates(tr, sf.mesh, sf.dm, data);
    CHECK(rep.max_interface_ratio > 0.0);
    CHECK(std::isfinite(rep.ui2_ratio));
    CHECK(rep.lipschitz_g > 0.0);
  }
  SECTION("mismatched trajectory and data are rejected") {
    WentzellFixture wf;
    ProblemData data = wf.data();
    RotheTrajectory tr = run_wentzell(wf.mesh, wf.dm, data);
    ProblemData other = wf.data();
    other.m = 7;
    CHECK_THROWS_AS(check_estimates(tr, wf.mesh, wf.dm, other), std::invalid_argument);
  }
}

TEST_CASE("trajectories are invariant under DOF renumbering") {
  WentzellFixture wf;
  wf.spec.f_kind = SourceKind::SinXY;
  wf.spec.j = JSpec::abs_val(0.4);
  wf.spec.tol = 1e-30;
  ProblemData data = wf.data();
  RotheTrajectory base = run_wentzell(wf.mesh, wf.dm, data);

  std::mt19937 rng(77);
  std::vector<int> perm(wf.dm.n_dofs);
  for (int i = 0; i < wf.dm.n_dofs; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  DofMap pdm = permute_dofs(wf.dm, perm);
  ProblemData pdata = data;
  pdata.u0 = Vec(wf.dm.n_dofs);
  for (int i = 0; i < wf.dm.n_dofs; ++i) pdata.u0[perm[i]] = data.u0[i];
  RotheTrajectory permuted = run_wentzell(wf.mesh, pdm, pdata);

  for (int s = 0; s <= base.m; ++s)
    for (int i = 0; i < wf.dm.n_dofs; ++i)
      CHECK(permuted.steps[s][perm[i]] ==
            Catch::Approx(base.steps[s][i]).margin(1e-11).epsilon(1e-11));
}
