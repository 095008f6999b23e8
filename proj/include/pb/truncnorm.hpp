// Standard-normal and lower-truncated-normal primitives. Everything downstream
// (bias formulas, adjustment chain, simulators) is driven by the truncation
// constants collected in SelectionContext.
#pragma once

#include <limits>

namespace pb {

/// Density of the standard normal, exp(-x^2/2)/sqrt(2*pi).
double std_normal_pdf(double x) noexcept;

/// CDF of the standard normal via erfc; absolute error below 1e-15 and full
/// relative precision in the lower tail.
double std_normal_cdf(double x) noexcept;

/// Inverse CDF. Rational initial guess polished with Halley steps against the
/// erfc-based CDF. Rejects p outside (0, 1).
double std_normal_quantile(double p);

// Participation rates below this are rejected as numerically meaningless.
inline constexpr double kMinAlpha = 1e-6;

/// Truncation constants for selection "keep X > t_alpha" on a standard-normal
/// liability X, where alpha is the participation rate.
///
/// Invariants: t_alpha = Phi^{-1}(1 - alpha); mills = phi(t_alpha)/alpha is the
/// mean of the truncated variable; xi = mills*(mills - t_alpha) in [0, 1), and
/// 1 - xi equals Var(X | X > t_alpha). alpha = 1 is the explicit no-selection
/// case: t_alpha = -inf, mills = 0, xi = 0.
struct SelectionContext {
  double alpha = 1.0;
  double t_alpha = -std::numeric_limits<double>::infinity();
  double mills = 0.0;
  double xi = 0.0;

  bool no_selection() const noexcept { return alpha == 1.0; }
};

/// Builds the truncation constants for a participation rate in [kMinAlpha, 1].
/// xi is evaluated as mills*(mills - t_alpha); the factored form avoids the
/// cancellation between mills^2 and t_alpha*mills at small alpha.
SelectionContext make_selection_context(double alpha);

/// Var(X | X > t_alpha) = 1 - xi(alpha).
double truncated_variance(double alpha);

}  // namespace pb
