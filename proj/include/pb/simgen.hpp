// Forward simulation engines: (i) component-level cohorts drawn from the
// multivariate-normal liability model with threshold selection, used as the
// Monte-Carlo counterpart of every closed-form expression; (ii) SNP-level
// cohorts with per-variant effects for end-to-end pipeline validation.
#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <vector>

#include "pb/jackknife.hpp"
#include "pb/ldsc.hpp"
#include "pb/model.hpp"
#include "pb/truncnorm.hpp"

namespace pb {

using BoolArray = Eigen::Array<bool, Eigen::Dynamic, 1>;

/// Component-level cohort: X = G_x + eps_x, Y = a*G_x + G_w + b*eps_x + eps_w,
/// population-standardized units. Columns for the second phenotype are empty
/// unless a pair was simulated.
struct MvnCohort {
  ParticipationParams part;
  PhenotypeParams p1;
  std::optional<PhenotypeParams> p2;
  double varphi_g = 0.0;
  double varphi_e = 0.0;
  SelectionContext sel;
  std::uint64_t seed = 0;

  Eigen::VectorXd g_x, eps_x, x;
  Eigen::VectorXd g_w1, eps_w1, y1;
  Eigen::VectorXd g_w2, eps_w2, y2;
  BoolArray selected;  // x > t_alpha

  bool has_pair() const { return p2.has_value(); }
  Eigen::Index n() const { return x.size(); }
  Eigen::Index n_selected() const { return selected.count(); }
};

MvnCohort simulate_mvn(const ParticipationParams& part, const PhenotypeParams& y,
                       const SelectionContext& sel, Eigen::Index n, std::uint64_t seed);
MvnCohort simulate_mvn(const ParticipationParams& part, const PairParams& pair,
                       const SelectionContext& sel, Eigen::Index n, std::uint64_t seed);

/// Quantities an unadjusted analysis would read off the selected rows: the
/// best-fitting genetic predictor of each phenotype (regression on G_x and
/// G_w), the variance it explains, the genetic correlations of the fitted
/// predictors, and the standardized mean shift against the full cohort.
struct MvnSampleQuantities {
  Eigen::Index n_selected = 0;
  double var_y1 = 0.0;  // Var(Y1 | selected)
  double h2_pb1 = 0.0;
  double rho_g_pb1 = 0.0;
  double delta1 = 0.0;
  bool has_pair = false;
  double var_y2 = 0.0;
  double h2_pb2 = 0.0;
  double rho_g_pb2 = 0.0;
  double delta2 = 0.0;
  double varphi_g_pb = 0.0;
};

MvnSampleQuantities empirical_sample_quantities(const MvnCohort& cohort);

/// Same quantities with block-jackknife standard errors over row blocks.
/// Estimate layout: [h2_pb1, rho_g_pb1, delta1] plus
/// [h2_pb2, rho_g_pb2, delta2, varphi_g_pb] for pairs.
JackknifeResult empirical_sample_quantities_blocked(const MvnCohort& cohort, int n_blocks);

struct SnpCohortConfig {
  Eigen::Index n = 10000;
  Eigen::Index m = 1000;
  double maf_low = 0.05;
  double maf_high = 0.95;
  Eigen::Index ld_block_size = 1;  // 1 = independent SNPs (LD score exactly 1)
  double ld_block_rho = 0.0;       // max latent gamete correlation within a block
  // Nonzero: draw fresh individuals (genotypes and environments) while keeping
  // the allele frequencies and effect sizes of the seed, e.g. an independent
  // reference cohort with the same genetic architecture.
  std::uint64_t individuals_salt = 0;
  std::uint64_t memory_budget_bytes = 2ull * 1024 * 1024 * 1024;
};

/// SNP-level cohort: Hardy-Weinberg dosages at uniform allele frequencies,
/// Gaussian per-SNP effects normalized so each genetic score has exactly the
/// declared variance, liability-threshold participation.
struct SnpCohort {
  ParticipationParams part;
  PhenotypeParams p1;
  std::optional<PhenotypeParams> p2;
  double varphi_g = 0.0;
  double varphi_e = 0.0;
  SelectionContext sel;
  SnpCohortConfig cfg;
  std::uint64_t seed = 0;

  Eigen::VectorXd freqs;
  Eigen::Matrix<std::int8_t, Eigen::Dynamic, Eigen::Dynamic> genotypes;  // n x m
  Eigen::VectorXd betas_x, betas_y1, betas_y2;  // standardized-dosage effects
  Eigen::VectorXd x, y1, y2;
  BoolArray selected;

  bool has_pair() const { return p2.has_value(); }
};

SnpCohort simulate_snp_cohort(const ParticipationParams& part, const PhenotypeParams& y,
                              const SelectionContext& sel, const SnpCohortConfig& cfg,
                              std::uint64_t seed);
SnpCohort simulate_snp_cohort(const ParticipationParams& part, const PairParams& pair,
                              const SelectionContext& sel, const SnpCohortConfig& cfg,
                              std::uint64_t seed);

enum class Trait { X, Y1, Y2 };

struct GwasResult {
  SumStats stats;
  std::vector<Eigen::Index> monomorphic;  // SNPs with zero dosage variance, z forced to 0
};

/// Per-SNP z-scores from simple regression of the phenotype on standardized
/// dosage among selected rows.
GwasResult gwas_on_selected(const SnpCohort& cohort, Trait trait);
/// Same over all rows (population-scale statistics, e.g. for the liability).
GwasResult gwas_on_all(const SnpCohort& cohort, Trait trait);

/// LD scores of the cohort's variants: exactly 1 in the independent-SNP model,
/// bias-corrected empirical within-block sums otherwise.
LdScores snp_ld_scores(const SnpCohort& cohort);

}  // namespace pb
