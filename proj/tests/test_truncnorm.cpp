#include <doctest.h>

#include <cmath>

#include "oracle.hpp"
#include "pb/errors.hpp"
#include "pb/truncnorm.hpp"

using namespace pb;

TEST_CASE("standard normal pdf") {
  CHECK(std_normal_pdf(0.0) == doctest::Approx(0.3989422804014327).epsilon(1e-13));
  CHECK(std_normal_pdf(1.0) == std_normal_pdf(-1.0));
  // Frozen from a 40-digit reference evaluation of exp(-x^2/2)/sqrt(2*pi).
  CHECK(std::abs(std_normal_pdf(1.598) - 0.1112761273188868) < 1e-15);
}

TEST_CASE("cdf and quantile basics") {
  CHECK(std_normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(std_normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-15));
  // Bisection oracle on the cdf itself.
  const double q = oracle::bisect_quantile([](double x) { return std_normal_cdf(x); }, 0.945);
  CHECK(std::abs(std_normal_quantile(0.945) - q) < 1e-12);
  CHECK(std_normal_quantile(0.945) == doctest::Approx(1.5981931399228176).epsilon(1e-12));
  CHECK_THROWS_AS(std_normal_quantile(0.0), InputError);
  CHECK_THROWS_AS(std_normal_quantile(1.0), InputError);
  CHECK_THROWS_AS(std_normal_quantile(-0.2), InputError);
}

TEST_CASE("quantile and cdf are mutually inverse over |x| <= 8") {
  // The round trip is exercised through the lower tail, where the cdf value
  // keeps full relative precision; the positive side follows by the symmetry
  // quantile(p) = -quantile(1-p) that both implementations satisfy. A direct
  // upper-tail round trip through a rounded double p is limited by the spacing
  // of doubles near 1, not by the algorithms.
  for (double x = 0.0; x <= 8.0; x += 0.03125) {
    const double p = std_normal_cdf(-x);
    CHECK(std::abs(std_normal_quantile(p) + x) < 1e-12);
  }
  // Well-conditioned direction on both sides.
  for (double p : {1e-12, 1e-6, 0.01, 0.3, 0.5, 0.7, 0.99, 1.0 - 1e-6, 1.0 - 1e-12}) {
    CHECK(std::abs(std_normal_cdf(std_normal_quantile(p)) - p) < 1e-14);
  }
  // Complement identity.
  for (double x = 0.0; x <= 8.0; x += 0.25) {
    CHECK(std_normal_cdf(x) + std_normal_cdf(-x) == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("selection context invariants") {
  SUBCASE("no selection") {
    const SelectionContext sel = make_selection_context(1.0);
    CHECK(sel.xi == 0.0);
    CHECK(sel.mills == 0.0);
    CHECK(std::isinf(sel.t_alpha));
    CHECK(sel.no_selection());
  }
  SUBCASE("alpha domain") {
    CHECK_THROWS_AS(make_selection_context(0.0), InputError);
    CHECK_THROWS_AS(make_selection_context(-0.1), InputError);
    CHECK_THROWS_AS(make_selection_context(1.0000001), InputError);
    CHECK_THROWS_AS(make_selection_context(1e-7), InputError);
    CHECK_NOTHROW(make_selection_context(1e-6));
  }
  SUBCASE("mills exceeds threshold, xi in [0,1)") {
    for (double alpha : {1e-6, 1e-4, 0.01, 0.055, 0.1, 0.5, 0.9, 0.999}) {
      const SelectionContext sel = make_selection_context(alpha);
      CHECK(sel.mills > 0.0);
      CHECK(sel.mills > sel.t_alpha);
      CHECK(sel.xi >= 0.0);
      CHECK(sel.xi < 1.0);
    }
  }
  SUBCASE("xi strictly decreases as alpha increases") {
    double prev = make_selection_context(0.001).xi;
    for (double alpha = 0.011; alpha < 1.0; alpha += 0.01) {
      const double xi = make_selection_context(alpha).xi;
      CHECK(xi < prev);
      prev = xi;
    }
  }
}

TEST_CASE("truncated variance against quadrature") {
  SUBCASE("exact special cases") {
    CHECK(truncated_variance(1.0) == 1.0);
    // Half-normal: Var(X | X > 0) = 1 - 2/pi.
    CHECK(std::abs(truncated_variance(0.5) - (1.0 - 2.0 / 3.14159265358979323846)) < 1e-12);
    CHECK(std::abs(make_selection_context(0.5).xi - 2.0 / 3.14159265358979323846) < 1e-12);
  }
  SUBCASE("quadrature oracle across alphas") {
    for (double alpha : {0.01, 0.055, 0.1, 0.25, 0.5, 0.75, 0.99}) {
      const SelectionContext sel = make_selection_context(alpha);
      const oracle::TruncMoments m = oracle::truncated_moments(sel.t_alpha);
      CHECK(std::abs(m.mass - alpha) < 1e-10);
      CHECK(std::abs(sel.mills - m.mean) < 1e-9);
      CHECK(std::abs((1.0 - sel.xi) - m.variance) < 1e-8);
    }
  }
  SUBCASE("headline participation rate") {
    const SelectionContext sel = make_selection_context(0.055);
    const oracle::TruncMoments m = oracle::truncated_moments(oracle::threshold_for_alpha(0.055));
    CHECK(std::abs((1.0 - sel.xi) - m.variance) < 1e-8);
    // Frozen oracle value.
    CHECK(sel.xi == doctest::Approx(0.8583513278975828).epsilon(1e-10));
  }
  SUBCASE("monte carlo oracle") {
    oracle::McScenario s;
    s.rho_g = 0.0;
    s.rho_e = 0.0;
    const auto mc = oracle::mc_truncated(s, 0.25, 400000, 99);
    const double tv = truncated_variance(0.25);
    CHECK(std::abs(mc.var_x_sel.estimate - tv) < 3.0 * mc.var_x_sel.se);
  }
}
