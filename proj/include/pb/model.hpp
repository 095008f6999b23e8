// Population-scale parameterization of a phenotype relative to participation,
// and the forward formulas for what an unadjusted analysis of participants
// would estimate (apparent heritability, apparent genetic correlations, mean
// shift). All quantities are on the population-standardized scale.
#pragma once

#include "pb/truncnorm.hpp"

namespace pb {

/// Heritability of the participation liability score, 0 < h2_x < 1.
struct ParticipationParams {
  double h2_x = 0.125;
};

/// One phenotype Y relative to participation X: heritability and the genetic /
/// non-genetic correlations with X.
struct PhenotypeParams {
  double h2_y = 0.5;
  double rho_g = 0.0;  // Corr(G_x, G_y)
  double rho_e = 0.0;  // Corr(eps_x, eps_y)
};

/// Two phenotypes with their mutual genetic and non-genetic correlations.
/// make_pair_params validates that the implied correlation structure of
/// (G_x, G_y1, G_y2) and (eps_x, eps_y1, eps_y2) is positive semidefinite.
struct PairParams {
  PhenotypeParams y1;
  PhenotypeParams y2;
  double varphi_g = 0.0;  // Corr(G_y1, G_y2)
  double varphi_e = 0.0;  // Corr(eps_y1, eps_y2)
};

/// Coefficients of the orthogonal decomposition Y = a*G_x + G_w + b*eps_x +
/// eps_w, plus the shrunk coefficient a_prime that the best genetic predictor
/// of Y carries on G_x in the selected sample.
struct ReparamCoeffs {
  double a = 0.0;
  double b = 0.0;
  double a_prime = 0.0;
  double var_gw = 0.0;  // Var(G_w)   = (1 - rho_g^2) h2_y
  double var_ew = 0.0;  // Var(eps_w) = (1 - rho_e^2)(1 - h2_y)
};

ParticipationParams make_participation_params(double h2_x);
PhenotypeParams make_phenotype_params(double h2_y, double rho_g, double rho_e);
PairParams make_pair_params(const PhenotypeParams& y1, const PhenotypeParams& y2,
                            double varphi_g, double varphi_e);

/// True if both 3x3 correlation blocks of (X, Y1, Y2) are PSD to -1e-10.
bool pair_params_valid(const PairParams& pair) noexcept;

// Derived population covariances.
double genetic_cov(const ParticipationParams& part, const PhenotypeParams& y);      // rho_G
double nongenetic_cov(const ParticipationParams& part, const PhenotypeParams& y);   // rho_E
double phenotypic_cor(const ParticipationParams& part, const PhenotypeParams& y);   // rho
double pair_genetic_cov(const PairParams& pair);                                    // varphi_G

/// Heritability of Y that an unadjusted analysis of participants estimates.
double apparent_h2(const ParticipationParams& part, const PhenotypeParams& y,
                   const SelectionContext& sel);

/// Apparent genetic correlation of Y1 and Y2 in the selected sample.
double apparent_pair_gcor(const ParticipationParams& part, const PairParams& pair,
                          const SelectionContext& sel);

/// Apparent genetic correlation between participation and Y. This is the pair
/// formula specialized to Y1 = X.
double apparent_participation_gcor(const ParticipationParams& part, const PhenotypeParams& y,
                                   const SelectionContext& sel);

/// Standardized mean shift of Y between participants and the population,
/// in selected-sample SD units.
double mean_shift(const ParticipationParams& part, const PhenotypeParams& y,
                  const SelectionContext& sel);

/// Orthogonal reparameterization and the post-selection predictor coefficient
/// a_prime = a - xi * b * (1 - h2_x) / (1 - xi * h2_x).
ReparamCoeffs reparam(const ParticipationParams& part, const PhenotypeParams& y,
                      const SelectionContext& sel);

}  // namespace pb
