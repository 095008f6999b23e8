#include "pb/truncnorm.hpp"

#include <cmath>
#include <string>

#include "pb/errors.hpp"

namespace pb {

namespace {

constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;
constexpr double kInvSqrt2 = 0.707106781186547524400844362105;

// Rational approximation of the normal quantile (Acklam). Relative error
// ~1e-9, used only as the starting point for Halley refinement.
double quantile_guess(double p) {
  static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                              -2.759285104469687e+02, 1.383577518672690e+02,
                              -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01};
  static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  const double q = std::sqrt(-2.0 * std::log1p(-p));
  return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
         ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
}

}  // namespace

double std_normal_pdf(double x) noexcept {
  return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

double std_normal_cdf(double x) noexcept {
  return 0.5 * std::erfc(-x * kInvSqrt2);
}

double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw InputError("std_normal_quantile: p must lie in (0,1), got " + std::to_string(p));
  }
  double x = quantile_guess(p);
  // Halley steps. The residual is formed in whichever tail keeps full relative
  // precision: Phi(x) - p directly for p <= 1/2, (1-p) - Phi(-x) otherwise
  // (1 - p is exact for p >= 1/2).
  for (int it = 0; it < 2; ++it) {
    const double f = (p <= 0.5) ? std_normal_cdf(x) - p : (1.0 - p) - std_normal_cdf(-x);
    const double u = f / std_normal_pdf(x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

SelectionContext make_selection_context(double alpha) {
  if (!(alpha >= kMinAlpha && alpha <= 1.0)) {
    throw InputError("make_selection_context: alpha must lie in [" +
                     std::to_string(kMinAlpha) + ", 1], got " + std::to_string(alpha));
  }
  SelectionContext sel;
  sel.alpha = alpha;
  if (alpha == 1.0) return sel;  // no selection: t = -inf, mills = 0, xi = 0
  // Phi^{-1}(1 - alpha) computed as -Phi^{-1}(alpha); forming 1 - alpha in
  // floating point would lose tail precision for small alpha.
  sel.t_alpha = -std_normal_quantile(alpha);
  sel.mills = std_normal_pdf(sel.t_alpha) / alpha;
  sel.xi = sel.mills * (sel.mills - sel.t_alpha);
  return sel;
}

double truncated_variance(double alpha) {
  return 1.0 - make_selection_context(alpha).xi;
}

}  // namespace pb
