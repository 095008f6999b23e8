// Minimal LD-score-regression estimators: heritability from chi^2 ~ N*l/m and
// genetic covariance/correlation from z1*z2 ~ sqrt(N1*N2)*l/m, with two-step
// heteroskedasticity weights and delete-one-block jackknife standard errors.
// Per-block sufficient statistics are exposed so longer estimator chains can
// be jackknifed through composition.
#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "pb/jackknife.hpp"

namespace pb {

struct SumStats {
  std::string trait;
  std::vector<std::string> snp;
  std::vector<std::string> a1;  // effect allele
  std::vector<std::string> a2;  // other allele
  Eigen::VectorXd n;            // per-SNP sample size
  Eigen::VectorXd z;

  Eigen::Index size() const { return z.size(); }
};

struct LdScores {
  std::vector<std::string> snp;
  Eigen::VectorXd l2;  // >= 1 under the independent-SNP model

  Eigen::Index size() const { return l2.size(); }
};

struct LdscOptions {
  int n_blocks = 200;
  bool fix_intercept = false;     // constrain the intercept instead of fitting it
  double intercept_value = 1.0;   // used when fix_intercept (0 for cross-trait)
};

/// Additive sufficient statistics of a weighted regression y ~ a + b*x.
struct WlsStat {
  double sw = 0.0, swx = 0.0, swxx = 0.0, swy = 0.0, swxy = 0.0;
  double count = 0.0;

  WlsStat& operator+=(const WlsStat& o) {
    sw += o.sw; swx += o.swx; swxx += o.swxx; swy += o.swy; swxy += o.swxy;
    count += o.count;
    return *this;
  }
  WlsStat& operator-=(const WlsStat& o) {
    sw -= o.sw; swx -= o.swx; swxx -= o.swxx; swy -= o.swy; swxy -= o.swxy;
    count -= o.count;
    return *this;
  }
};

struct WlsFit {
  double intercept = 0.0;
  double slope = 0.0;
};

WlsFit solve_wls(const WlsStat& s);                          // free intercept
double solve_wls_slope(const WlsStat& s, double intercept);  // fixed intercept

/// Several summary-statistics sets restricted to their common SNPs (which must
/// also carry an LD score), z signs harmonized to the first set's allele
/// orientation. SNP order follows the first set's file order.
struct Panel {
  std::vector<std::string> snp;
  Eigen::VectorXd l2;
  std::vector<std::string> traits;
  std::vector<Eigen::VectorXd> z;
  std::vector<Eigen::VectorXd> n;

  Eigen::Index n_snps() const { return l2.size(); }
};

/// Intersects and harmonizes. Misaligned alleles that cannot be resolved by a
/// swap raise an error listing the offending SNPs.
Panel build_panel(const std::vector<SumStats>& stats, const LdScores& ld);

/// Per-block statistics for the chi^2 regression of one trait; weights are the
/// two-step heteroskedasticity weights computed once from the full data.
std::vector<WlsStat> h2_regression_blocks(const Panel& panel, Eigen::Index trait,
                                          std::int64_t m, const LdscOptions& opts);

/// Per-block statistics for the z1*z2 regression of two traits.
std::vector<WlsStat> gcov_regression_blocks(const Panel& panel, Eigen::Index t1,
                                            Eigen::Index t2, std::int64_t m,
                                            const LdscOptions& opts);

struct LdscH2 {
  double h2 = 0.0, h2_se = 0.0;
  double intercept = 0.0, intercept_se = 0.0;
  JackknifeResult jk;  // columns: [h2, intercept]
  std::vector<WlsStat> blocks;
  double n_bar = 0.0;
  std::int64_t m = 0;
  Eigen::Index n_snps = 0;
};

LdscH2 ldsc_h2(const SumStats& stats, const LdScores& ld, std::int64_t m,
               const LdscOptions& opts = {});

struct LdscGcov {
  double gcov = 0.0, gcov_se = 0.0;
  double gcor = 0.0, gcor_se = 0.0;
  double intercept = 0.0, intercept_se = 0.0;
  double h2_1 = 0.0, h2_2 = 0.0;
  JackknifeResult jk;  // columns: [gcov, gcor, intercept]
  Eigen::Index n_snps = 0;
};

LdscGcov ldsc_gcov(const SumStats& stats1, const SumStats& stats2, const LdScores& ld,
                   std::int64_t m, const LdscOptions& opts = {});

}  // namespace pb
