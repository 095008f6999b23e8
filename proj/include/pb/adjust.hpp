// The inverse problem: transform bias-affected sample estimates into adjusted
// population-scale estimates, given the participation rate, the externally
// estimated participation heritability, and observed mean shifts.
//
// On exact forward-model inputs the chain recovers the population parameters
// exactly; on noisy inputs out-of-range values are reported unclamped with
// warning flags so downstream resampling stays valid.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pb/truncnorm.hpp"

namespace pb {

/// Unadjusted (bias-affected) estimates for one phenotype.
struct PhenotypeEstimates {
  double h2_y_hat = 0.0;   // unadjusted heritability
  double rho_g_hat = 0.0;  // unadjusted genetic correlation with participation
  double delta_hat = 0.0;  // observed mean shift, selected-sample SD units
};

/// Everything the adjustment chain consumes. h2_x_hat comes from the external
/// participation analysis and is never estimated here. y2/varphi_g_hat are set
/// when a phenotype pair is adjusted.
struct SampleEstimates {
  double alpha = 1.0;
  double h2_x_hat = 0.0;
  PhenotypeEstimates y1;
  std::optional<PhenotypeEstimates> y2;
  std::optional<double> varphi_g_hat;  // unadjusted pairwise genetic correlation
};

struct AdjustedPhenotype {
  double rho_hat = 0.0;      // phenotypic correlation with participation, from delta
  double rho_G_tilde = 0.0;  // adjusted genetic covariance with participation
  double h2_y_tilde = 0.0;
  double rho_g_tilde = 0.0;
  double rho_e_tilde = 0.0;
  std::vector<std::string> warnings;  // out-of-range values, reported unclamped
};

struct AdjustedPair {
  AdjustedPhenotype y1;
  AdjustedPhenotype y2;
  double varphi_G_tilde = 0.0;
  double varphi_g_tilde = 0.0;
  std::vector<std::string> warnings;
};

/// Phenotypic correlation implied by an observed mean shift,
/// rho = alpha*delta / sqrt(xi*alpha^2*delta^2 + phi(t_alpha)^2).
/// Exact inverse of the forward mean-shift formula. alpha must be in (0,1).
double rho_from_delta(double delta_hat, double alpha);
double rho_from_delta(double delta_hat, const SelectionContext& sel);

/// Adjusted genetic covariance of participation and Y:
/// rho_G~ = sqrt(1 - xi*rho^2) * rho_G^ + xi*rho*h2_x, with
/// rho_G^ = rho_g^ * sqrt((1 - xi*h2_x) * h2_x * h2_y).
double adjust_participation_gcov(double rho_g_hat, double h2_x_hat, double h2_y_hat,
                                 double rho_hat, const SelectionContext& sel);

/// Adjusted heritability of Y (may fall outside [0,1] on noisy inputs; callers
/// flag, display layers clamp).
double adjust_h2(double h2_y_hat, double rho_hat, double rho_G_tilde, double h2_x_hat,
                 const SelectionContext& sel);

/// rho_g~ = rho_G~ / sqrt(h2_x * h2_y~).
double adjust_participation_gcor(double rho_G_tilde, double h2_x_hat, double h2_y_tilde);

/// rho_e~ = (rho^ - rho_G~) / sqrt((1 - h2_x)(1 - h2_y~)).
double adjust_rho_e(double rho_hat, double rho_G_tilde, double h2_x_hat, double h2_y_tilde);

/// Adjusted genetic covariance of a phenotype pair. Requires delta, h2 and
/// rho_g estimates for both phenotypes plus their pairwise genetic correlation.
double adjust_pair_gcov(const SampleEstimates& est, const SelectionContext& sel);

/// varphi_g~ = varphi_G~ / sqrt(h2_y1~ * h2_y2~).
double adjust_pair_gcor(double varphi_G_tilde, double h2_y1_tilde, double h2_y2_tilde);

/// Observed-scale to liability-scale heritability for a binary trait with
/// sample prevalence P and population prevalence K.
double observed_to_liability_h2(double h2_obs, double sample_prevalence,
                                double population_prevalence);

/// Runs the full per-phenotype chain (delta -> rho -> gcov -> h2 -> gcor ->
/// rho_e) and collects range warnings. alpha = 1 reduces to the identity map.
AdjustedPhenotype adjust_phenotype(const PhenotypeEstimates& y, double h2_x_hat,
                                   const SelectionContext& sel);

/// Per-phenotype chains for both traits plus the pairwise adjustment.
AdjustedPair adjust_pair(const SampleEstimates& est, const SelectionContext& sel);

}  // namespace pb
