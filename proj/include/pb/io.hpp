// Data ingestion, preprocessing (rank-based inverse normal transform,
// covariate residualization, mean-shift computation) and serialization.
// Numeric output uses shortest round-trip formatting, so re-reading any
// emitted file reproduces the in-memory values bit-exactly.
#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pb/ldsc.hpp"

namespace pb {

// ---------------------------------------------------------------------------
// Preprocessing

/// Blom rank-based inverse normal transform, Phi^{-1}((r - 3/8)/(n + 1/4)),
/// ties resolved by average rank, NaN entries passed through. With strata,
/// ranks are computed within each stratum. A stratum with fewer than 2
/// non-missing values, or with all values equal, is an error.
Eigen::VectorXd rank_inverse_normal(const Eigen::VectorXd& values);
Eigen::VectorXd rank_inverse_normal(const Eigen::VectorXd& values,
                                    const std::vector<std::string>& strata);

/// Least-squares residuals of y on [1, covariates]. Rank deficiency is an
/// error naming the collinear columns. No missing values allowed here; filter
/// rows first.
Eigen::VectorXd residualize(const Eigen::VectorXd& y, const Eigen::MatrixXd& covariates,
                            const std::vector<std::string>& covariate_names);

struct MeanShiftRecord {
  std::string phenotype;
  double delta_hat = 0.0;  // (mean_sample - mean_reference) / sd_sample
  double alpha = 1.0;
  Eigen::Index n_sample = 0;
  Eigen::Index n_reference = 0;
};

MeanShiftRecord compute_mean_shift(const std::string& phenotype,
                                   const Eigen::VectorXd& sample,
                                   const Eigen::VectorXd& reference, double alpha);

// ---------------------------------------------------------------------------
// Tabular data (phenotypes + covariates, one row per individual)

struct PhenotypeTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> cells;  // row-major raw strings

  Eigen::Index n_rows() const { return static_cast<Eigen::Index>(cells.size()); }
  bool has_column(const std::string& name) const;
  /// Numeric view of a column; missing markers (NA, empty, nan, .) become NaN.
  Eigen::VectorXd numeric_column(const std::string& name) const;
  std::vector<std::string> string_column(const std::string& name) const;
};

/// Reads CSV (or whitespace-delimited if the header has no comma).
PhenotypeTable read_phenotype_table(const std::string& path);

// ---------------------------------------------------------------------------
// Summary statistics / LD scores / mean shifts

/// Header columns SNP A1 A2 N Z (case-insensitive), tab- or
/// whitespace-delimited. Unknown columns are ignored with a warning; a missing
/// required column or malformed line is an error naming it.
SumStats read_sumstats(const std::string& path, std::vector<std::string>* warnings = nullptr);
void write_sumstats(const SumStats& stats, const std::string& path);

/// Header columns SNP and L2 (or LDSCORE), extra columns ignored.
LdScores read_ld_scores(const std::string& path, std::vector<std::string>* warnings = nullptr);
void write_ld_scores(const LdScores& ld, const std::string& path);

/// CSV with header phenotype,delta,alpha,n_sample,n_reference.
std::vector<MeanShiftRecord> read_mean_shifts(const std::string& path);
void write_mean_shifts(const std::vector<MeanShiftRecord>& records, const std::string& path);

// ---------------------------------------------------------------------------
// Config: flat "key = value" text grouped in [section] headers

struct Config {
  std::vector<std::string> section_order;
  std::map<std::string, std::map<std::string, std::string>> sections;

  bool has_section(const std::string& section) const;
  bool has(const std::string& section, const std::string& key) const;
  std::string get_string(const std::string& section, const std::string& key) const;
  std::string get_string_or(const std::string& section, const std::string& key,
                            const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key) const;
  double get_double_or(const std::string& section, const std::string& key,
                       double fallback) const;
  std::int64_t get_int_or(const std::string& section, const std::string& key,
                          std::int64_t fallback) const;
  bool get_bool_or(const std::string& section, const std::string& key, bool fallback) const;
  std::vector<double> get_double_list(const std::string& section, const std::string& key) const;
  /// Section names starting with "<prefix> ", e.g. "phenotype BMI" -> "BMI".
  std::vector<std::string> subsections(const std::string& prefix) const;
};

Config read_config(const std::string& path);

// ---------------------------------------------------------------------------
// Results

struct ResultRow {
  std::string phenotype;  // single name, or "A:B" for a pair
  std::string estimate_type;
  double original = 0.0;
  double adjusted = 0.0;
  double se_original = 0.0;
  double se_adjusted = 0.0;
  std::string warning;
  std::map<std::string, double> extra;  // p-values etc., JSONL only
};

void write_results_csv(const std::vector<ResultRow>& rows, const std::string& path);
void write_results_jsonl(const std::vector<ResultRow>& rows, const std::string& path);

// ---------------------------------------------------------------------------
// Helpers

/// Shortest decimal string that round-trips to the same double.
std::string format_double(double v);
double parse_double(const std::string& text, const std::string& context);

/// FNV-1a 64-bit digest of a file's bytes, hex-encoded.
std::string file_digest_hex(const std::string& path);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace pb
