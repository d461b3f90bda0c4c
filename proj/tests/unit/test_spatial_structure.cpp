#include <cmath>
#include <fstream>
#include <string>

#include "doctest.h"
#include "mbym2/error.hpp"
#include "mbym2/io.hpp"
#include "mbym2/linalg.hpp"
#include "mbym2/spatial_structure.hpp"
#include "oracles.hpp"

using namespace mbym2;

namespace {

double geometric_mean(const VectorXd& v) { return std::exp(v.array().log().mean()); }

}  // namespace

TEST_CASE("two-node path") {
  const std::vector<Edge> edges{{0, 1}};
  const auto g = build_adjacency(edges, 2);
  CHECK(g.W == (MatrixXd(2, 2) << 0, 1, 1, 0).finished());
  CHECK(g.degree_matrix() == MatrixXd::Identity(2, 2));
}

TEST_CASE("triangle has degree two everywhere") {
  const std::vector<Edge> edges{{0, 1}, {1, 2}, {2, 0}};
  const auto g = build_adjacency(edges, 3);
  CHECK(g.neighbor_counts.isApproxToConstant(2.0));
}

TEST_CASE("duplicate and reversed edges collapse") {
  const std::vector<Edge> edges{{0, 1}, {1, 0}, {0, 1}, {1, 2}};
  const auto g = build_adjacency(edges, 3);
  CHECK(g.edges.size() == 2);
  CHECK(g.W.sum() == 4.0);
}

TEST_CASE("bad graphs are rejected") {
  const std::vector<Edge> isolated{{0, 1}};
  try {
    build_adjacency(isolated, 3);
    FAIL("isolated region accepted");
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()).find("region 2") != std::string::npos);
  }
  const std::vector<Edge> out_of_range{{0, 3}};
  CHECK_THROWS_AS(build_adjacency(out_of_range, 3), InvalidArgument);
  const std::vector<Edge> loop{{0, 0}, {0, 1}};
  CHECK_THROWS_AS(build_adjacency(loop, 2), InvalidArgument);
  const std::vector<Edge> two_parts{{0, 1}, {2, 3}};
  CHECK_THROWS_AS(build_adjacency(two_parts, 4), InvalidArgument);
}

TEST_CASE("California counties") {
  const auto g = california_counties();
  CHECK(g.n == 58);
  CHECK(g.edges.size() == 139);
  CHECK(g.W == g.W.transpose());
  CHECK(g.W.diagonal().isZero());
  CHECK(california_county_names().size() == 58);
  CHECK(california_county_names()[0] == "Alameda");
  CHECK(california_county_names()[57] == "Yuba");

  // bundled data file and the compiled-in list agree
  const auto from_file = read_adjacency(std::string(MBYM2_DATA_DIR) + "/california_counties.adj");
  CHECK(from_file.edges == g.edges);
}

TEST_CASE("CAR precision") {
  const auto g = oracle::path_graph(2);
  CHECK(car_precision(g, 0.5).isApprox((MatrixXd(2, 2) << 1, -0.5, -0.5, 1).finished()));
  CHECK(car_precision(g, 1e-12).isApprox(g.degree_matrix(), 1e-10));
  CHECK_THROWS_AS(car_precision(g, 1.0), InvalidArgument);
  CHECK_THROWS_AS(car_precision(g, 0.0), InvalidArgument);
  CHECK(min_eigenvalue(car_precision(california_counties(), 0.99)) > 0.0);
}

TEST_CASE("SAR precision") {
  const auto g = oracle::path_graph(2);
  CHECK(sar_precision(g, 0.5).isApprox((MatrixXd(2, 2) << 1.25, -1, -1, 1.25).finished()));
  const auto lattice = oracle::lattice_graph(3, 4);
  CHECK(sar_precision(lattice, 1e-12).isApprox(MatrixXd::Identity(12, 12), 1e-10));
  CHECK_THROWS_AS(sar_precision(g, -0.1), InvalidArgument);

  const MatrixXd ca = sar_precision(california_counties(), 0.99);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(ca);
  CHECK(es.eigenvalues().minCoeff() > 0.0);
  CHECK(std::isfinite(es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff()));

  // matches the row-normalised form built by hand
  MatrixXd Wt = lattice.W;
  for (Index i = 0; i < Wt.rows(); ++i) Wt.row(i) /= Wt.row(i).sum();
  const MatrixXd A = MatrixXd::Identity(12, 12) - 0.7 * Wt;
  CHECK(relative_frobenius(sar_precision(lattice, 0.7), A.transpose() * A) < 1e-14);
}

TEST_CASE("scale_precision") {
  const auto id = scale_precision(MatrixXd::Identity(4, 4), PrecisionKind::car, 0.5);
  CHECK(id.c == doctest::Approx(1.0));
  CHECK(id.precision.isApprox(MatrixXd::Identity(4, 4)));

  MatrixXd bad = MatrixXd::Identity(3, 3);
  bad(2, 2) = -1.0;
  try {
    scale_precision(bad, PrecisionKind::car, 0.5);
    FAIL("non-PD precision accepted");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("-1") != std::string::npos);
  }

  Rng rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const auto g = oracle::random_graph(20 + 6 * trial, 0.08, rng);
    for (auto kind : {PrecisionKind::car, PrecisionKind::sar}) {
      const auto s = make_scaled_precision(g, kind, 0.9);
      const MatrixXd cov = s.precision.inverse();
      CHECK(geometric_mean(cov.diagonal()) == doctest::Approx(1.0).epsilon(1e-8));
      CHECK(geometric_mean(s.covariance_diag) == doctest::Approx(1.0).epsilon(1e-8));
      // idempotent
      CHECK(scale_precision(s.precision, kind, 0.9).c == doctest::Approx(1.0).epsilon(1e-10));
    }
  }
}

TEST_CASE("California scaling constants") {
  const auto g = california_counties();
  // dense inverse, independent of the library's scaling path
  const MatrixXd car = g.degree_matrix() - 0.99 * g.W;
  const double c_car = geometric_mean(car.inverse().diagonal());
  CHECK(c_car == doctest::Approx(0.8352).epsilon(0.01 / 0.8352));
  CHECK(make_scaled_precision(g, PrecisionKind::car, 0.99).c == doctest::Approx(c_car).epsilon(1e-10));
  const double c_sar = make_scaled_precision(g, PrecisionKind::sar, 0.99).c;
  CHECK(std::abs(c_sar - 220.1809) < 0.5);
}

TEST_CASE("spectral_decompose") {
  const auto id = spectral_decompose(scale_precision(MatrixXd::Identity(3, 3), PrecisionKind::car, 0.5));
  CHECK(id.lambda.isApproxToConstant(1.0));

  ScaledPrecision two;
  two.precision = (MatrixXd(2, 2) << 1, -0.5, -0.5, 1).finished();
  const auto s2 = spectral_decompose(two);
  CHECK(s2.lambda(0) == doctest::Approx(0.5));
  CHECK(s2.lambda(1) == doctest::Approx(1.5));

  const auto car = make_scaled_precision(california_counties(), PrecisionKind::car, 0.99);
  const auto s = spectral_decompose(car);
  const Index n = car.n();
  CHECK((s.Q.transpose() * s.Q - MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(relative_frobenius(s.Q * s.lambda.asDiagonal() * s.Q.transpose(), car.precision) < 1e-8);
  CHECK(relative_frobenius(s.sqrt_precision * s.sqrt_precision, car.precision) < 1e-8);
  CHECK(relative_frobenius(s.sqrt_covariance * s.sqrt_precision, MatrixXd::Identity(n, n)) < 1e-8);
}

TEST_CASE("projected_spectral invariants") {
  SUBCASE("intercept only, identity structure") {
    const auto id = scale_precision(MatrixXd::Identity(6, 6), PrecisionKind::car, 0.5);
    const auto ps = projected_spectral(id, MatrixXd::Ones(6, 1));
    CHECK(ps.zero_count == 1);
    CHECK((ps.U.transpose() * ps.U - MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(ps.H.isApprox(MatrixXd::Constant(6, 6, 1.0 / 6.0)));
  }
  SUBCASE("path of five with one covariate") {
    Rng rng(2);
    const auto prec = make_scaled_precision(oracle::path_graph(5), PrecisionKind::car, 0.9);
    const auto ps = projected_spectral(prec, oracle::random_design(5, 1, rng));
    CHECK(ps.zero_count == 2);
    CHECK((ps.k.array() == 0.0).count() == 2);
    CHECK(ps.k_star.sum() == 3.0);
  }
  SUBCASE("random graphs") {
    Rng rng(3);
    for (Index n : {10, 25, 50}) {
      const auto g = oracle::random_graph(n, 0.1, rng);
      for (auto kind : {PrecisionKind::car, PrecisionKind::sar}) {
        const auto prec = make_scaled_precision(g, kind, 0.95);
        const MatrixXd X = oracle::random_design(n, 2, rng);
        const auto ps = projected_spectral(prec, X);
        const MatrixXd I = MatrixXd::Identity(n, n);
        CHECK((ps.H * ps.H - ps.H).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((ps.H - ps.H.transpose()).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((ps.U * ps.U_inv - I).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(relative_frobenius(ps.U_inv.transpose() * ps.U_inv, prec.precision) < 1e-8);
        CHECK(relative_frobenius(ps.U_inv.transpose() * ps.k.asDiagonal() * ps.U_inv, I - ps.H) < 1e-8);
        CHECK(ps.zero_count == 3);
      }
    }
  }
  SUBCASE("California with one covariate") {
    Rng rng(4);
    const auto prec = make_scaled_precision(california_counties(), PrecisionKind::car, 0.99);
    const auto ps = projected_spectral(prec, oracle::random_design(58, 1, rng));
    CHECK(relative_frobenius(ps.U_inv.transpose() * ps.k.asDiagonal() * ps.U_inv,
                             MatrixXd::Identity(58, 58) - ps.H) < 1e-8);
  }
  SUBCASE("rank deficient design") {
    const auto prec = make_scaled_precision(oracle::path_graph(5), PrecisionKind::car, 0.9);
    MatrixXd X(5, 2);
    X.col(0).setOnes();
    X.col(1).setConstant(3.0);
    CHECK_THROWS_AS(projected_spectral(prec, X), InvalidArgument);
  }
}
