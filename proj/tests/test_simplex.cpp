#include <catch_amalgamated.hpp>
#include <cmath>

#include "simplex_uq/error.hpp"
#include "simplex_uq/simplex.hpp"

using namespace simplex_uq;
using Catch::Approx;

namespace {

const DesignKind kClosedForm[] = {
    DesignKind::kMultinomial, DesignKind::kDoubleMultinomialWithReplacement,
    DesignKind::kDoubleMultinomialWithoutReplacement, DesignKind::kUniformSimplex};

const DesignKind kAllDesigns[] = {
    DesignKind::kRepeatedPure,
    DesignKind::kRepeatedBinary,
    DesignKind::kMultinomial,
    DesignKind::kDoubleMultinomialWithReplacement,
    DesignKind::kDoubleMultinomialWithoutReplacement,
    DesignKind::kUniformSimplex,
    DesignKind::kPseudoUniform};

// E[U1^2], E[U1 U2] for U = X / sum(X), X iid U(0,1)^3, by midpoint quadrature.
std::pair<double, double> pseudo_uniform_quadrature(int n) {
  double s2 = 0.0;
  double s11 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = (i + 0.5) / n;
    for (int j = 0; j < n; ++j) {
      const double y = (j + 0.5) / n;
      for (int k = 0; k < n; ++k) {
        const double z = (k + 0.5) / n;
        const double s = x + y + z;
        s2 += x * x / (s * s);
        s11 += x * y / (s * s);
      }
    }
  }
  const double cells = static_cast<double>(n) * n * n;
  return {s2 / cells, s11 / cells};
}

}  // namespace

TEST_CASE("validate_composition accepts, clamps and renormalizes") {
  Vector v(3);
  v << 0.2, 0.3, 0.5;
  REQUIRE(validate_composition(v).values().isApprox(v));

  v << 0.5, -5e-13, 0.5;
  const Composition c = validate_composition(v);
  REQUIRE(c[1] == 0.0);
  REQUIRE(c.values().sum() == Approx(1.0).epsilon(1e-15));

  v << 0.5 + 4e-10, 0.25, 0.25;
  REQUIRE(validate_composition(v).values().sum() == Approx(1.0).epsilon(1e-15));
}

TEST_CASE("validate_composition names the offending index") {
  Vector v(3);
  v << 0.6, -0.1, 0.5;
  try {
    validate_composition(v);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    REQUIRE(e.index() == 1);
    REQUIRE(e.exit_code() == ExitCode::kUsage);
  }
  v << 0.3, 0.3, 0.3;
  try {
    validate_composition(v);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    REQUIRE(e.index() == -1);
  }
  v << 0.5, std::nan(""), 0.5;
  REQUIRE_THROWS_AS(validate_composition(v), ValidationError);
}

TEST_CASE("design names round-trip and invalid designs are rejected") {
  for (DesignKind d : kAllDesigns) REQUIRE(parse_design(design_name(d)) == d);
  REQUIRE_THROWS_AS(parse_design("dirichlet"), ParameterError);
  REQUIRE_THROWS_AS((MixtureDesign{DesignKind::kMultinomial, 1, 1}.validate()), ParameterError);
  REQUIRE_THROWS_AS(
      (MixtureDesign{DesignKind::kDoubleMultinomialWithoutReplacement, 2, 1}.validate()),
      ParameterError);
  REQUIRE_THROWS_AS((MixtureDesign{DesignKind::kRepeatedPure, 3, 0}.validate()), ParameterError);
}

TEST_CASE("every design samples points on the simplex") {
  Rng rng(5);
  for (DesignKind d : kAllDesigns) {
    for (int m : {3, 4, 7}) {
      const MixtureDesign design{d, m, 2};
      const Matrix c = sample_compositions(design, 500, rng);
      REQUIRE(c.rows() == m);
      for (Eigen::Index i = 0; i < c.cols(); ++i) {
        REQUIRE(in_simplex(c.col(i)));
      }
    }
  }
}

TEST_CASE("repeated designs cycle through their unique compositions") {
  Rng rng(1);
  const MixtureDesign binary{DesignKind::kRepeatedBinary, 4, 3};
  const Matrix c = sample_compositions(binary, 12, rng);
  const Matrix unique = binary_design_matrix(4);
  for (Eigen::Index i = 0; i < 12; ++i) REQUIRE(c.col(i) == unique.col(i % 4));
  Matrix expected(4, 4);
  expected << 0.5, 0, 0, 0,
              0.5, 0.5, 0, 0,
              0, 0.5, 0.5, 0,
              0, 0, 0.5, 1;
  REQUIRE(unique == expected);
  REQUIRE(unique_design_matrix({DesignKind::kRepeatedPure, 3, 1}) == Matrix::Identity(3, 3));
}

TEST_CASE("closed-form moments at M = 3") {
  // sigma = E[U1^2], beta = E[U1 U2]
  auto m3 = [](DesignKind d) { return exact_moments({d, 3, 1}); };
  REQUIRE(m3(DesignKind::kMultinomial).sigma == Approx(1.0 / 3.0));
  REQUIRE(m3(DesignKind::kMultinomial).beta == 0.0);
  REQUIRE(m3(DesignKind::kDoubleMultinomialWithReplacement).sigma == Approx(4.0 / 18.0));
  REQUIRE(m3(DesignKind::kDoubleMultinomialWithReplacement).beta == Approx(1.0 / 18.0));
  REQUIRE(m3(DesignKind::kDoubleMultinomialWithoutReplacement).sigma == Approx(1.0 / 6.0));
  REQUIRE(m3(DesignKind::kDoubleMultinomialWithoutReplacement).beta == Approx(1.0 / 12.0));
  REQUIRE(m3(DesignKind::kUniformSimplex).sigma == Approx(1.0 / 6.0));
  REQUIRE(m3(DesignKind::kUniformSimplex).beta == Approx(1.0 / 12.0));
  REQUIRE_THROWS_AS(exact_moments({DesignKind::kPseudoUniform, 3, 1}),
                    UnsupportedClosedFormError);
}

TEST_CASE("closed-form moments satisfy the boundary identity and correlation") {
  for (DesignKind d : kClosedForm) {
    for (int m = 3; m <= 40; ++m) {
      const MomentPair p = exact_moments({d, m, 1});
      REQUIRE(std::abs(m * p.sigma + m * (m - 1.0) * p.beta - 1.0) <= 1e-12);
      REQUIRE(pairwise_correlation(p, m) == Approx(-1.0 / (m - 1.0)).margin(1e-12));
    }
  }
}

TEST_CASE("correlation is undefined for a degenerate design") {
  REQUIRE_THROWS_AS(pairwise_correlation(MomentPair{0.25, 0.25}, 2), UndefinedCorrelationError);
}

TEST_CASE("numeric moments agree with the closed forms") {
  Rng rng(2024);
  for (DesignKind d : kClosedForm) {
    const MixtureDesign design{d, 5, 1};
    const MomentPair exact = exact_moments(design);
    const MomentEstimate est = numeric_moments(design, 200000, rng);
    REQUIRE(std::abs(est.moments.sigma - exact.sigma) <= 4.0 * est.sigma_se + 1e-12);
    REQUIRE(std::abs(est.moments.beta - exact.beta) <= 4.0 * est.beta_se + 1e-12);
  }
  REQUIRE_THROWS_AS(numeric_moments({DesignKind::kMultinomial, 3, 1}, 999, rng), ParameterError);
}

TEST_CASE("pseudo-uniform moments match cubature of the normalized cube") {
  const auto [sigma_q, beta_q] = pseudo_uniform_quadrature(100);
  // Frozen output of the cubature above.
  REQUIRE(sigma_q == Approx(0.1434107795323081).epsilon(1e-12));
  REQUIRE(beta_q == Approx(0.09496127690051259).epsilon(1e-12));

  Rng rng(77);
  const MomentEstimate est = numeric_moments({DesignKind::kPseudoUniform, 3, 1}, 1000000, rng);
  // The midpoint rule error is O(1e-4) times the integrand curvature, well below 4 SE.
  REQUIRE(std::abs(est.moments.sigma - sigma_q) <= 4.0 * est.sigma_se + 1e-5);
  REQUIRE(std::abs(est.moments.beta - beta_q) <= 4.0 * est.beta_se + 1e-5);
}

TEST_CASE("numeric moments do not depend on the thread count") {
  const MixtureDesign design{DesignKind::kUniformSimplex, 4, 1};
  Rng a(9);
  Rng b(9);
  const MomentEstimate one = numeric_moments(design, 100000, a, 1);
  const MomentEstimate four = numeric_moments(design, 100000, b, 4);
  REQUIRE(one.moments.sigma == four.moments.sigma);
  REQUIRE(one.moments.beta == four.moments.beta);
}
