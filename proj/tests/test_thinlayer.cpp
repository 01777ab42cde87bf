#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "rothevi/thinlayer.hpp"

using namespace rothevi;

namespace {

DataSpec layer_spec() {
  DataSpec s;
  s.sigma1 = 2.0;
  s.sigma2 = 1.0;
  s.alpha = 1.0;
  s.beta = 0.0;
  s.T = 0.25;
  s.m = 4;
  s.tol = 1e-30;
  s.S_kind = InitKind::SinProfile;
  s.S_amplitude = 1.0;
  return s;
}

}  // namespace

TEST_CASE("band geometry at one cell ring") {
  LayerMesh lm = build_layer_mesh(8, 0.125, 1.0);
  lm.mesh.audit();
  for (int s = 0; s < 4; ++s) CHECK(lm.band_cells[s] == 1);
  // exact offset-band polygon area: eps*|Gamma| + 4 eps^2
  CHECK(lm.total_layer_volume() == Catch::Approx(0.3125).margin(1e-12));
}

TEST_CASE("band geometry errors") {
  // unresolvable: rounds to zero cells
  CHECK_THROWS_AS(build_layer_mesh(8, 0.01, 1.0), GeometryError);
  // band would leave the domain (needs cells <= n/4 - 1)
  CHECK_THROWS_AS(build_layer_mesh(8, 0.25, 1.0), GeometryError);
  CHECK_THROWS_AS(build_layer_mesh(8, 0.125, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(build_layer_mesh(8, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("band tags partition the elements") {
  LayerMesh lm = build_layer_mesh(8, 0.125, 1.0);
  int n1 = 0, n2 = 0, nl = 0;
  for (Subdomain s : lm.mesh.subdomain) {
    if (s == Subdomain::Omega1) ++n1;
    if (s == Subdomain::Omega2) ++n2;
    if (s == Subdomain::Layer) ++nl;
  }
  CHECK(n1 == 32);   // inner 4x4 cells
  CHECK(nl == 40);   // 6x6 ring minus inner 4x4, twice per cell
  CHECK(n1 + n2 + nl == lm.mesh.n_elements());
}

TEST_CASE("per-side widths with distinct gammas") {
  LayerMesh lm = build_layer_mesh(16, 0.125, {1.0, 1.5, 1.0, 1.0});
  CHECK(lm.band_cells[kLeft] == 2);
  CHECK(lm.band_cells[kRight] == 3);
  CHECK(lm.band_width[kRight] == Catch::Approx(0.1875));
  lm.mesh.audit();
}

TEST_CASE("only the product epsilon*gamma enters the discretization") {
  LayerMesh a = build_layer_mesh(16, 0.125, 1.0);
  LayerMesh b = build_layer_mesh(16, 0.25, 0.5);
  CHECK(a.band_cells == b.band_cells);
  CHECK(a.node_volume == b.node_volume);
  CHECK(a.node_width == b.node_width);

  DofMap dm = build_dof_map(a.mesh, DofMode::Continuous);
  DataSpec spec = layer_spec();
  spec.j = JSpec::abs_val(0.5);
  ProblemData da = spec.instantiate(a.mesh, dm);
  da.u0 = lift_layer_datum(a, dm, da.S);
  ProblemData db = spec.instantiate(b.mesh, dm);
  db.u0 = lift_layer_datum(b, dm, db.S);
  RotheTrajectory ta = run_perturbed(a, dm, da);
  RotheTrajectory tb = run_perturbed(b, dm, db);
  for (int i = 0; i <= ta.m; ++i)
    CHECK((ta.steps[i] - tb.steps[i]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("layer averages") {
  LayerMesh lm = build_layer_mesh(16, 0.125, 1.0);  // two cell rings
  DofMap dm = build_dof_map(lm.mesh, DofMode::Continuous);

  SECTION("constant field averages to itself") {
    Vec u = Vec::Constant(dm.n_dofs, 3.25);
    Vec avg = layer_average(lm, dm, u);
    for (Eigen::Index k = 0; k < avg.size(); ++k) CHECK(avg[k] == Catch::Approx(3.25));
  }
  SECTION("linear transverse profile averages to its midpoint") {
    Vec u = Vec::Zero(dm.n_dofs);
    const double w = lm.band_width[kLeft];
    for (int node = 0; node < lm.mesh.n_nodes(); ++node) {
      if (dm.dof1[node] < 0) continue;
      const Vec2& p = lm.mesh.nodes[node];
      double dist = std::max(std::abs(p.x - 0.5), std::abs(p.y - 0.5)) - 0.25;
      u[dm.dof1[node]] = std::min(std::max(dist / w, 0.0), 1.0);
    }
    Vec avg = layer_average(lm, dm, u);
    for (Eigen::Index k = 0; k < avg.size(); ++k)
      CHECK(avg[k] == Catch::Approx(0.5).margin(1e-12));
  }
  SECTION("unit weights reproduce the band volume over the width") {
    double sum = layer_quadrature(lm, [](double, double) { return 1.0; });
    const double w = lm.band_width[kLeft];
    CHECK(sum == Catch::Approx(2.0 + 4.0 * w).margin(1e-12));
  }
}

TEST_CASE("band-constant initial lift") {
  LayerMesh lm = build_layer_mesh(16, 0.125, 1.0);
  DofMap dm = build_dof_map(lm.mesh, DofMode::Continuous);
  DataSpec spec = layer_spec();
  Vec S = spec.interface_profile(lm.mesh);
  Vec u0 = lift_layer_datum(lm, dm, S);
  // every chain node carries the value of its interface foot
  for (std::size_t k = 0; k < lm.chains.size(); ++k)
    for (int node : lm.chains[k])
      CHECK(u0[dm.dof1[node]] == Catch::Approx(S[k]).margin(1e-12));
}

TEST_CASE("perturbed runs") {
  LayerMesh lm = build_layer_mesh(8, 0.125, 1.0);
  DofMap dm = build_dof_map(lm.mesh, DofMode::Continuous);
  DataSpec spec = layer_spec();

  SECTION("zero data stays zero") {
    spec.S_kind = InitKind::Zero;
    ProblemData data = spec.instantiate(lm.mesh, dm);
    data.u0 = lift_layer_datum(lm, dm, data.S);
    RotheTrajectory tr = run_perturbed(lm, dm, data);
    for (const Vec& u : tr.steps) CHECK(u.cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("linear case matches a dense factorization") {
    spec.f_kind = SourceKind::SinXY;
    ProblemData data = spec.instantiate(lm.mesh, dm);
    data.u0 = lift_layer_datum(lm, dm, data.S);
    StepOperator op = StepOperator::perturbed(lm.mesh, dm, data, layer_mass(lm, dm));
    Eigen::MatrixXd Ad(op.matrix());
    Vec u = data.u0;
    for (int i = 1; i <= data.m; ++i) {
      Vec b = op.rhs(u, data.h() * i);
      Vec direct = Ad.ldlt().solve(b);
      u = op.step(u, data.h() * i);
      CHECK((u - direct).norm() <= 1e-9 * (1.0 + direct.norm()));
    }
  }
  SECTION("sourceless band norm contracts for eligible j") {
    for (JSpec j : {JSpec::zero(), JSpec::abs_val(0.5), JSpec::positive_part(1.0)}) {
      spec.j = j;
      ProblemData data = spec.instantiate(lm.mesh, dm);
      data.u0 = lift_layer_datum(lm, dm, data.S);
      RotheTrajectory tr = run_perturbed(lm, dm, data);
      InterfaceMass band = layer_mass(lm, dm);
      double prev = kInf;
      for (int i = 0; i <= tr.m; ++i) {
        double sq = 0;
        for (int k = 0; k < band.selector.size(); ++k) {
          double v = band.selector.value(tr.steps[i], k);
          sq += band.weights[k] * v * v;
        }
        if (i > 0) CHECK(std::sqrt(sq) <= prev + 1e-12 * (1.0 + prev));
        prev = std::sqrt(sq);
      }
    }
  }
  SECTION("interval indicator is ineligible") {
    spec.j = JSpec::interval(-1.0, 1.0);
    ProblemData data = spec.instantiate(lm.mesh, dm);
    data.u0 = lift_layer_datum(lm, dm, data.S);
    CHECK_THROWS_AS(run_perturbed(lm, dm, data), std::invalid_argument);
  }
}

TEST_CASE("band quadrature converges to the interface quadrature") {
  // Lemma-style check: lumped (1/(eps gamma)) integrals over the band
  // approach the lumped interface integral linearly in eps.
  const int n = 32;
  BidomainMesh ref = build_inclusion_mesh(n);
  auto polys = {
      std::function<double(double, double)>([](double, double) { return 1.0; }),
      std::function<double(double, double)>([](double x, double) { return x; }),
      std::function<double(double, double)>([](double x, double) { return x * x; })};
  for (const auto& wfun : polys) {
    double i_gamma = interface_quadrature(ref, wfun);
    double prev_err = 0;
    int step = 0;
    for (double eps : {0.25, 0.125, 0.0625}) {
      LayerMesh lm = build_layer_mesh(n, eps, 0.5);
      double err = std::abs(layer_quadrature(lm, wfun) - i_gamma);
      if (step++) CHECK(std::log2(prev_err / err) >= 0.9);
      prev_err = err;
    }
  }
}

TEST_CASE("vanishing thickness study converges") {
  DataSpec spec = layer_spec();
  spec.m = 2;
  spec.tol = 1e-11;
  spec.j = JSpec::abs_val(0.5);
  std::vector<ThinLayerRow> rows = convergence_study(spec, 0.5, {0.25, 0.125}, 16);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].band_width_cells == 2);
  CHECK(rows[1].band_width_cells == 1);
  CHECK(rows[1].distance < rows[0].distance);
  CHECK(rows[0].layer_norm_bound > 0.0);
  CHECK(rows[1].layer_norm_bound <= 2.0 * rows[0].layer_norm_bound);
}

TEST_CASE("study input validation") {
  DataSpec spec = layer_spec();
  SECTION("interval j rejected") {
    spec.j = JSpec::interval(-1.0, 1.0);
    CHECK_THROWS_AS(convergence_study(spec, 0.5, {0.25, 0.125}, 16), std::invalid_argument);
  }
  SECTION("beta must vanish") {
    spec.beta = 0.5;
    CHECK_THROWS_AS(convergence_study(spec, 0.5, {0.25, 0.125}, 16), std::invalid_argument);
  }
  SECTION("eps list must decrease") {
    CHECK_THROWS_AS(convergence_study(spec, 0.5, {0.125, 0.25}, 16), std::invalid_argument);
  }
}
