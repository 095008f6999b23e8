#include "pb/adjust.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pb/errors.hpp"

namespace pb {

namespace {

double checked_gx_norm(double h2_x_hat, const SelectionContext& sel) {
  const double v = 1.0 - sel.xi * h2_x_hat;
  if (!(v > 0.0)) {
    throw NumericError("degenerate selection: 1 - xi*h2_x <= 0 (h2_x = " +
                       std::to_string(h2_x_hat) + ")");
  }
  return v;
}

void check_finite(double v, const char* name) {
  if (!std::isfinite(v)) {
    throw InputError(std::string(name) + " must be finite");
  }
}

// rho_G^ from the unadjusted genetic correlation, participation heritability
// and unadjusted phenotype heritability. A slightly negative point estimate of
// h2_y from a noisy upstream estimator contributes zero genetic covariance;
// callers flag it.
double participation_gcov_hat(double rho_g_hat, double h2_x_hat, double h2_y_hat,
                              const SelectionContext& sel) {
  const double dx = checked_gx_norm(h2_x_hat, sel);
  return rho_g_hat * std::sqrt(dx * h2_x_hat * std::max(h2_y_hat, 0.0));
}

}  // namespace

double rho_from_delta(double delta_hat, const SelectionContext& sel) {
  if (!(sel.alpha > 0.0 && sel.alpha < 1.0)) {
    throw InputError("rho_from_delta: alpha must lie in (0,1), got " +
                     std::to_string(sel.alpha));
  }
  check_finite(delta_hat, "delta_hat");
  const double ad = sel.alpha * delta_hat;
  const double phi_t = sel.alpha * sel.mills;  // phi(t_alpha)
  return ad / std::sqrt(sel.xi * ad * ad + phi_t * phi_t);
}

double rho_from_delta(double delta_hat, double alpha) {
  return rho_from_delta(delta_hat, make_selection_context(alpha));
}

double adjust_participation_gcov(double rho_g_hat, double h2_x_hat, double h2_y_hat,
                                 double rho_hat, const SelectionContext& sel) {
  const double rho_G_hat = participation_gcov_hat(rho_g_hat, h2_x_hat, h2_y_hat, sel);
  const double s = 1.0 - sel.xi * rho_hat * rho_hat;
  if (!(s > 0.0)) {
    throw NumericError("degenerate selection: 1 - xi*rho^2 <= 0");
  }
  return std::sqrt(s) * rho_G_hat + sel.xi * rho_hat * h2_x_hat;
}

double adjust_h2(double h2_y_hat, double rho_hat, double rho_G_tilde, double h2_x_hat,
                 const SelectionContext& sel) {
  const double xi = sel.xi;
  const double dx = checked_gx_norm(h2_x_hat, sel);
  const double u = rho_G_tilde - xi * rho_hat * h2_x_hat;
  return h2_y_hat * (1.0 - xi * rho_hat * rho_hat) + 2.0 * xi * rho_hat * rho_G_tilde -
         xi * xi * rho_hat * rho_hat * h2_x_hat - xi / dx * u * u;
}

double adjust_participation_gcor(double rho_G_tilde, double h2_x_hat, double h2_y_tilde) {
  if (!(h2_x_hat > 0.0 && h2_y_tilde > 0.0)) {
    throw NumericError("adjust_participation_gcor: h2_x and adjusted h2_y must be positive");
  }
  return rho_G_tilde / std::sqrt(h2_x_hat * h2_y_tilde);
}

double adjust_rho_e(double rho_hat, double rho_G_tilde, double h2_x_hat, double h2_y_tilde) {
  const double d = (1.0 - h2_x_hat) * (1.0 - h2_y_tilde);
  if (!(d > 0.0)) {
    throw NumericError("adjust_rho_e: (1 - h2_x)(1 - h2_y~) must be positive");
  }
  return (rho_hat - rho_G_tilde) / std::sqrt(d);
}

double adjust_pair_gcov(const SampleEstimates& est, const SelectionContext& sel) {
  if (!est.y2.has_value() || !est.varphi_g_hat.has_value()) {
    throw InputError("adjust_pair_gcov: pair adjustment needs both phenotypes and varphi_g");
  }
  const double xi = sel.xi;
  const double h2x = est.h2_x_hat;
  const double dx = checked_gx_norm(h2x, sel);

  const double rho1 = sel.no_selection() ? 0.0 : rho_from_delta(est.y1.delta_hat, sel);
  const double rho2 = sel.no_selection() ? 0.0 : rho_from_delta(est.y2->delta_hat, sel);
  const double s1 = std::sqrt(1.0 - xi * rho1 * rho1);
  const double s2 = std::sqrt(1.0 - xi * rho2 * rho2);

  // Adjusted participation gcov for each phenotype; the correction terms below
  // need the adjusted values for the chain to invert the forward pair formula
  // exactly.
  const double rG1 =
      adjust_participation_gcov(est.y1.rho_g_hat, h2x, est.y1.h2_y_hat, rho1, sel);
  const double rG2 =
      adjust_participation_gcov(est.y2->rho_g_hat, h2x, est.y2->h2_y_hat, rho2, sel);

  const double varphi_G_hat =
      *est.varphi_g_hat * std::sqrt(est.y1.h2_y_hat * est.y2->h2_y_hat);
  const double u1 = rG1 - xi * rho1 * h2x;
  const double u2 = rG2 - xi * rho2 * h2x;
  return s1 * s2 * varphi_G_hat + xi * (rho1 * rG2 + rho2 * rG1) -
         xi * xi * rho1 * rho2 * h2x - xi / dx * u1 * u2;
}

double adjust_pair_gcor(double varphi_G_tilde, double h2_y1_tilde, double h2_y2_tilde) {
  if (!(h2_y1_tilde > 0.0 && h2_y2_tilde > 0.0)) {
    throw NumericError("adjust_pair_gcor: adjusted heritabilities must be positive");
  }
  return varphi_G_tilde / std::sqrt(h2_y1_tilde * h2_y2_tilde);
}

double observed_to_liability_h2(double h2_obs, double sample_prevalence,
                                double population_prevalence) {
  if (!(sample_prevalence > 0.0 && sample_prevalence < 1.0) ||
      !(population_prevalence > 0.0 && population_prevalence < 1.0)) {
    throw InputError("observed_to_liability_h2: prevalences must lie strictly in (0,1)");
  }
  const double k = population_prevalence;
  const double p = sample_prevalence;
  const double z = std_normal_pdf(-std_normal_quantile(k));  // phi(Phi^{-1}(1-K))
  return h2_obs * k * k * (1.0 - k) * (1.0 - k) / (p * (1.0 - p) * z * z);
}

AdjustedPhenotype adjust_phenotype(const PhenotypeEstimates& y, double h2_x_hat,
                                   const SelectionContext& sel) {
  check_finite(y.h2_y_hat, "h2_y_hat");
  check_finite(y.rho_g_hat, "rho_g_hat");
  AdjustedPhenotype out;
  if (y.h2_y_hat < 0.0) out.warnings.push_back("unadjusted h2_y is negative");
  if (std::abs(y.rho_g_hat) > 1.0) out.warnings.push_back("unadjusted rho_g outside [-1,1]");

  out.rho_hat = sel.no_selection() ? 0.0 : rho_from_delta(y.delta_hat, sel);
  if (std::abs(out.rho_hat) >= 1.0) {
    out.warnings.push_back("mean shift implies |rho| >= 1");
  }
  out.rho_G_tilde =
      adjust_participation_gcov(y.rho_g_hat, h2_x_hat, y.h2_y_hat, out.rho_hat, sel);
  out.h2_y_tilde = adjust_h2(y.h2_y_hat, out.rho_hat, out.rho_G_tilde, h2_x_hat, sel);
  if (out.h2_y_tilde < 0.0 || out.h2_y_tilde > 1.0) {
    out.warnings.push_back("adjusted h2_y outside [0,1]");
  }
  if (out.h2_y_tilde > 0.0) {
    out.rho_g_tilde = adjust_participation_gcor(out.rho_G_tilde, h2_x_hat, out.h2_y_tilde);
    if (std::abs(out.rho_g_tilde) > 1.0) {
      out.warnings.push_back("adjusted rho_g outside [-1,1]");
    }
  } else {
    // Noisy upstream h2 can push the adjusted value through zero; the
    // correlation is then undefined and reported as such rather than aborting
    // (leave-one-out resampling must stay evaluable).
    out.rho_g_tilde = std::numeric_limits<double>::quiet_NaN();
    out.warnings.push_back("adjusted rho_g undefined: adjusted h2_y is not positive");
  }
  if (sel.no_selection()) {
    // With everyone participating the mean shift is identically zero and
    // carries no information about the phenotypic correlation, so rho_e has no
    // estimator here; everything else reduces to the identity map.
    out.rho_e_tilde = std::numeric_limits<double>::quiet_NaN();
    out.warnings.push_back("rho_e not identifiable without selection (alpha = 1)");
  } else if (out.h2_y_tilde < 1.0) {
    out.rho_e_tilde = adjust_rho_e(out.rho_hat, out.rho_G_tilde, h2_x_hat, out.h2_y_tilde);
    if (std::abs(out.rho_e_tilde) > 1.0) {
      out.warnings.push_back("adjusted rho_e outside [-1,1]");
    }
  } else {
    out.rho_e_tilde = std::numeric_limits<double>::quiet_NaN();
    out.warnings.push_back("adjusted rho_e undefined: adjusted h2_y is not below 1");
  }
  return out;
}

AdjustedPair adjust_pair(const SampleEstimates& est, const SelectionContext& sel) {
  if (!est.y2.has_value() || !est.varphi_g_hat.has_value()) {
    throw InputError("adjust_pair: pair adjustment needs both phenotypes and varphi_g");
  }
  AdjustedPair out;
  out.y1 = adjust_phenotype(est.y1, est.h2_x_hat, sel);
  out.y2 = adjust_phenotype(*est.y2, est.h2_x_hat, sel);
  out.varphi_G_tilde = adjust_pair_gcov(est, sel);
  out.varphi_g_tilde =
      adjust_pair_gcor(out.varphi_G_tilde, out.y1.h2_y_tilde, out.y2.h2_y_tilde);
  if (std::abs(out.varphi_g_tilde) > 1.0) {
    out.warnings.push_back("adjusted varphi_g outside [-1,1]");
  }
  return out;
}

}  // namespace pb
