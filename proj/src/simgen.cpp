#include "pb/simgen.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <string>

#include "pb/errors.hpp"
#include "pb/rng.hpp"

namespace pb {

namespace {

// Stream ids: spaced so per-SNP and per-block substreams never collide.
constexpr std::uint64_t kStreamFreqs = 0;
constexpr std::uint64_t kStreamBetas = 1;
constexpr std::uint64_t kStreamEps = 2;
constexpr std::uint64_t kStreamMvn = 3;
inline std::uint64_t snp_stream(Eigen::Index j) { return 8 * static_cast<std::uint64_t>(j) + 4; }
inline std::uint64_t block_stream(Eigen::Index b) { return 8 * static_cast<std::uint64_t>(b) + 5; }

struct Chol2 {
  double l11 = 0.0, l21 = 0.0, l22 = 0.0;
};

// Cholesky factor of [[v1, c], [c, v2]]; tolerates tiny negative pivots from
// boundary parameters, rejects genuinely non-PSD input.
Chol2 chol2(double v1, double v2, double c, const char* what) {
  Chol2 f;
  if (v1 > 1e-14) {
    f.l11 = std::sqrt(v1);
    f.l21 = c / f.l11;
  } else {
    if (std::abs(c) > 1e-9) {
      throw InputError(std::string(what) + ": degenerate variance with nonzero covariance");
    }
    f.l11 = std::sqrt(std::max(v1, 0.0));
    f.l21 = 0.0;
  }
  double rest = v2 - f.l21 * f.l21;
  if (rest < -1e-9) {
    throw InputError(std::string(what) + ": covariance structure is not PSD");
  }
  f.l22 = std::sqrt(std::max(rest, 0.0));
  return f;
}

// Lower Cholesky factor of a 3x3 correlation matrix.
Eigen::Matrix3d chol3_corr(double r12, double r13, double r23, const char* what) {
  Eigen::Matrix3d c;
  c << 1.0, r12, r13, r12, 1.0, r23, r13, r23, 1.0;
  Eigen::LLT<Eigen::Matrix3d> llt(c);
  if (llt.info() != Eigen::Success) {
    // Allow boundary cases (correlations of +-1) via a jittered retry.
    Eigen::Matrix3d cj = c + 1e-12 * Eigen::Matrix3d::Identity();
    llt.compute(cj);
    if (llt.info() != Eigen::Success) {
      throw InputError(std::string(what) + ": correlation matrix is not PSD");
    }
  }
  return llt.matrixL();
}

MvnCohort simulate_mvn_impl(const ParticipationParams& part, const PhenotypeParams& p1,
                            const std::optional<PhenotypeParams>& p2, double varphi_g,
                            double varphi_e, const SelectionContext& sel, Eigen::Index n,
                            std::uint64_t seed) {
  if (n < 1) throw InputError("simulate_mvn: n must be >= 1");
  if (!(part.h2_x > 0.0 && part.h2_x < 1.0)) {
    throw InputError("simulate_mvn: h2_x must lie in (0,1)");
  }
  if (p2.has_value()) {
    PairParams pair{p1, *p2, varphi_g, varphi_e};
    if (!pair_params_valid(pair)) {
      throw InputError("simulate_mvn: non-PSD pair parameters");
    }
  }

  MvnCohort c;
  c.part = part;
  c.p1 = p1;
  c.p2 = p2;
  c.varphi_g = varphi_g;
  c.varphi_e = varphi_e;
  c.sel = sel;
  c.seed = seed;

  const double sd_gx = std::sqrt(part.h2_x);
  const double sd_ex = std::sqrt(1.0 - part.h2_x);
  const double a1 = p1.rho_g * std::sqrt(p1.h2_y / part.h2_x);
  const double b1 = p1.rho_e * std::sqrt((1.0 - p1.h2_y) / (1.0 - part.h2_x));

  Rng rng = Rng::stream(seed, kStreamMvn);
  c.g_x.resize(n);
  c.eps_x.resize(n);
  c.g_w1.resize(n);
  c.eps_w1.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) c.g_x(i) = sd_gx * rng.normal();
  for (Eigen::Index i = 0; i < n; ++i) c.eps_x(i) = sd_ex * rng.normal();

  if (!p2.has_value()) {
    const double sd_gw = std::sqrt((1.0 - p1.rho_g * p1.rho_g) * p1.h2_y);
    const double sd_ew = std::sqrt((1.0 - p1.rho_e * p1.rho_e) * (1.0 - p1.h2_y));
    for (Eigen::Index i = 0; i < n; ++i) c.g_w1(i) = sd_gw * rng.normal();
    for (Eigen::Index i = 0; i < n; ++i) c.eps_w1(i) = sd_ew * rng.normal();
  } else {
    const PhenotypeParams& q = *p2;
    const double a2 = q.rho_g * std::sqrt(q.h2_y / part.h2_x);
    const double b2 = q.rho_e * std::sqrt((1.0 - q.h2_y) / (1.0 - part.h2_x));
    const double var_gw1 = (1.0 - p1.rho_g * p1.rho_g) * p1.h2_y;
    const double var_gw2 = (1.0 - q.rho_g * q.rho_g) * q.h2_y;
    const double cov_gw = varphi_g * std::sqrt(p1.h2_y * q.h2_y) - a1 * a2 * part.h2_x;
    const double var_ew1 = (1.0 - p1.rho_e * p1.rho_e) * (1.0 - p1.h2_y);
    const double var_ew2 = (1.0 - q.rho_e * q.rho_e) * (1.0 - q.h2_y);
    const double cov_ew =
        varphi_e * std::sqrt((1.0 - p1.h2_y) * (1.0 - q.h2_y)) - b1 * b2 * (1.0 - part.h2_x);
    const Chol2 fg = chol2(var_gw1, var_gw2, cov_gw, "simulate_mvn genetic residuals");
    const Chol2 fe = chol2(var_ew1, var_ew2, cov_ew, "simulate_mvn non-genetic residuals");

    c.g_w2.resize(n);
    c.eps_w2.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double z1 = rng.normal();
      const double z2 = rng.normal();
      c.g_w1(i) = fg.l11 * z1;
      c.g_w2(i) = fg.l21 * z1 + fg.l22 * z2;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const double z1 = rng.normal();
      const double z2 = rng.normal();
      c.eps_w1(i) = fe.l11 * z1;
      c.eps_w2(i) = fe.l21 * z1 + fe.l22 * z2;
    }
  }

  c.x = c.g_x + c.eps_x;
  c.y1 = a1 * c.g_x + c.g_w1 + b1 * c.eps_x + c.eps_w1;
  if (p2.has_value()) {
    const double a2 = p2->rho_g * std::sqrt(p2->h2_y / part.h2_x);
    const double b2 = p2->rho_e * std::sqrt((1.0 - p2->h2_y) / (1.0 - part.h2_x));
    c.y2 = a2 * c.g_x + c.g_w2 + b2 * c.eps_x + c.eps_w2;
  }
  c.selected = sel.no_selection() ? BoolArray::Constant(n, true)
                                  : (c.x.array() > sel.t_alpha).eval();
  return c;
}

// Sums of the selected-row vector v = (g_x, g_w1, g_w2, y1, y2) and its outer
// product, plus full-cohort phenotype sums (the population reference for the
// mean shift).
struct MomentStat {
  double n_sel = 0.0;
  Eigen::Matrix<double, 5, 1> s = Eigen::Matrix<double, 5, 1>::Zero();
  Eigen::Matrix<double, 5, 5> ss = Eigen::Matrix<double, 5, 5>::Zero();
  double n_all = 0.0;
  double sum_y1_all = 0.0;
  double sum_y2_all = 0.0;

  MomentStat& operator+=(const MomentStat& o) {
    n_sel += o.n_sel; s += o.s; ss += o.ss;
    n_all += o.n_all; sum_y1_all += o.sum_y1_all; sum_y2_all += o.sum_y2_all;
    return *this;
  }
  MomentStat& operator-=(const MomentStat& o) {
    n_sel -= o.n_sel; s -= o.s; ss -= o.ss;
    n_all -= o.n_all; sum_y1_all -= o.sum_y1_all; sum_y2_all -= o.sum_y2_all;
    return *this;
  }
};

MomentStat accumulate_moments(const MvnCohort& c, Eigen::Index lo, Eigen::Index hi) {
  MomentStat st;
  const bool pair = c.has_pair();
  Eigen::Matrix<double, 5, 1> v = Eigen::Matrix<double, 5, 1>::Zero();
  for (Eigen::Index i = lo; i < hi; ++i) {
    st.n_all += 1.0;
    st.sum_y1_all += c.y1(i);
    if (pair) st.sum_y2_all += c.y2(i);
    if (!c.selected(i)) continue;
    v(0) = c.g_x(i);
    v(1) = c.g_w1(i);
    v(2) = pair ? c.g_w2(i) : 0.0;
    v(3) = c.y1(i);
    v(4) = pair ? c.y2(i) : 0.0;
    st.n_sel += 1.0;
    st.s += v;
    st.ss += v * v.transpose();
  }
  return st;
}

// Regression of a phenotype on (G_x, G_w) from the selected-sample covariance;
// returns Var(fit), Corr(G_x, fit) and the coefficients.
struct GeneticFit {
  Eigen::Vector2d beta;
  double var_fit = 0.0;
  double cor_gx = 0.0;
};

GeneticFit genetic_fit(const Eigen::Matrix<double, 5, 5>& cov, int gw_index, int y_index) {
  Eigen::Matrix2d p;
  p << cov(0, 0), cov(0, gw_index), cov(gw_index, 0), cov(gw_index, gw_index);
  Eigen::Vector2d cxy(cov(0, y_index), cov(gw_index, y_index));
  GeneticFit fit;
  if (p(1, 1) <= 1e-14 * p(0, 0)) {
    // Degenerate G_w (phenotype fully genetically aligned with participation):
    // regress on G_x alone.
    fit.beta(0) = cxy(0) / p(0, 0);
    fit.beta(1) = 0.0;
    fit.var_fit = fit.beta(0) * fit.beta(0) * p(0, 0);
    fit.cor_gx = fit.beta(0) > 0.0 ? 1.0 : -1.0;
    return fit;
  }
  const double det = p(0, 0) * p(1, 1) - p(0, 1) * p(1, 0);
  if (!(std::abs(det) > 0.0)) {
    throw NumericError("empirical_sample_quantities: singular predictor covariance");
  }
  fit.beta(0) = (p(1, 1) * cxy(0) - p(0, 1) * cxy(1)) / det;
  fit.beta(1) = (p(0, 0) * cxy(1) - p(1, 0) * cxy(0)) / det;
  fit.var_fit = fit.beta.dot(p * fit.beta);
  const double cov_gx_fit = p.row(0).dot(fit.beta);
  fit.cor_gx = cov_gx_fit / std::sqrt(p(0, 0) * fit.var_fit);
  return fit;
}

MvnSampleQuantities quantities_from_moments(const MomentStat& st, bool pair) {
  if (st.n_sel < 2.0) {
    throw NumericError("empirical_sample_quantities: fewer than 2 selected rows");
  }
  const double k = st.n_sel;
  const Eigen::Matrix<double, 5, 1> mean = st.s / k;
  const Eigen::Matrix<double, 5, 5> cov =
      (st.ss - k * mean * mean.transpose()) / (k - 1.0);

  MvnSampleQuantities q;
  q.n_selected = static_cast<Eigen::Index>(k);
  q.has_pair = pair;
  q.var_y1 = cov(3, 3);
  const GeneticFit f1 = genetic_fit(cov, 1, 3);
  q.h2_pb1 = f1.var_fit / cov(3, 3);
  q.rho_g_pb1 = f1.cor_gx;
  q.delta1 = (mean(3) - st.sum_y1_all / st.n_all) / std::sqrt(cov(3, 3));
  if (pair) {
    q.var_y2 = cov(4, 4);
    const GeneticFit f2 = genetic_fit(cov, 2, 4);
    q.h2_pb2 = f2.var_fit / cov(4, 4);
    q.rho_g_pb2 = f2.cor_gx;
    q.delta2 = (mean(4) - st.sum_y2_all / st.n_all) / std::sqrt(cov(4, 4));
    // Cov(fit1, fit2) over predictors (g_x, g_w1) x (g_x, g_w2).
    Eigen::Matrix2d c12;
    c12 << cov(0, 0), cov(0, 2), cov(1, 0), cov(1, 2);
    const double cov_fits = f1.beta.dot(c12 * f2.beta);
    q.varphi_g_pb = cov_fits / std::sqrt(f1.var_fit * f2.var_fit);
  }
  return q;
}

}  // namespace

MvnCohort simulate_mvn(const ParticipationParams& part, const PhenotypeParams& y,
                       const SelectionContext& sel, Eigen::Index n, std::uint64_t seed) {
  return simulate_mvn_impl(part, y, std::nullopt, 0.0, 0.0, sel, n, seed);
}

MvnCohort simulate_mvn(const ParticipationParams& part, const PairParams& pair,
                       const SelectionContext& sel, Eigen::Index n, std::uint64_t seed) {
  return simulate_mvn_impl(part, pair.y1, pair.y2, pair.varphi_g, pair.varphi_e, sel, n,
                           seed);
}

MvnSampleQuantities empirical_sample_quantities(const MvnCohort& cohort) {
  return quantities_from_moments(accumulate_moments(cohort, 0, cohort.n()),
                                 cohort.has_pair());
}

JackknifeResult empirical_sample_quantities_blocked(const MvnCohort& cohort, int n_blocks) {
  const auto ranges = block_ranges(cohort.n(), n_blocks);
  std::vector<MomentStat> blocks;
  blocks.reserve(ranges.size());
  for (const auto& [lo, hi] : ranges) blocks.push_back(accumulate_moments(cohort, lo, hi));
  const bool pair = cohort.has_pair();
  return block_jackknife(blocks, [pair](const MomentStat& st) {
    const MvnSampleQuantities q = quantities_from_moments(st, pair);
    Eigen::VectorXd v(pair ? 7 : 3);
    v(0) = q.h2_pb1;
    v(1) = q.rho_g_pb1;
    v(2) = q.delta1;
    if (pair) {
      v(3) = q.h2_pb2;
      v(4) = q.rho_g_pb2;
      v(5) = q.delta2;
      v(6) = q.varphi_g_pb;
    }
    return v;
  });
}

namespace {

SnpCohort simulate_snp_impl(const ParticipationParams& part, const PhenotypeParams& p1,
                            const std::optional<PhenotypeParams>& p2, double varphi_g,
                            double varphi_e, const SelectionContext& sel,
                            const SnpCohortConfig& cfg, std::uint64_t seed) {
  const Eigen::Index n = cfg.n;
  const Eigen::Index m = cfg.m;
  if (n < 2 || m < 1) throw InputError("simulate_snp_cohort: need n >= 2 and m >= 1");
  if (!(cfg.maf_low >= 0.01 && cfg.maf_high <= 0.99 && cfg.maf_low < cfg.maf_high)) {
    throw InputError("simulate_snp_cohort: allele frequencies must lie in [0.01, 0.99]");
  }
  const std::uint64_t bytes =
      static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(m);
  if (bytes > cfg.memory_budget_bytes) {
    throw InputError("simulate_snp_cohort: genotype matrix needs " + std::to_string(bytes) +
                     " bytes, over the budget of " + std::to_string(cfg.memory_budget_bytes) +
                     " (raise it or set PBADJUST_MAX_BYTES)");
  }
  if (cfg.ld_block_size < 1 || (cfg.ld_block_size > 1 && m % cfg.ld_block_size != 0)) {
    throw InputError("simulate_snp_cohort: ld_block_size must divide m");
  }
  if (!(cfg.ld_block_rho >= 0.0 && cfg.ld_block_rho < 1.0)) {
    throw InputError("simulate_snp_cohort: ld_block_rho must lie in [0,1)");
  }
  if (p2.has_value() &&
      !pair_params_valid(PairParams{p1, *p2, varphi_g, varphi_e})) {
    throw InputError("simulate_snp_cohort: non-PSD pair parameters");
  }

  SnpCohort c;
  c.part = part;
  c.p1 = p1;
  c.p2 = p2;
  c.varphi_g = varphi_g;
  c.varphi_e = varphi_e;
  c.sel = sel;
  c.cfg = cfg;
  c.seed = seed;

  // Frequencies and effects are keyed on the seed alone; individual-level
  // draws (genotypes, environments) also mix in the salt, so a salted cohort
  // shares the genetic architecture but none of the people.
  const std::uint64_t iseed =
      cfg.individuals_salt == 0
          ? seed
          : splitmix64(seed ^ splitmix64(cfg.individuals_salt));

  // Allele frequencies.
  c.freqs.resize(m);
  {
    Rng rng = Rng::stream(seed, kStreamFreqs);
    for (Eigen::Index j = 0; j < m; ++j) {
      c.freqs(j) = cfg.maf_low + (cfg.maf_high - cfg.maf_low) * rng.uniform();
    }
  }

  // Per-SNP standardized effects, drawn with the declared genetic correlation
  // structure and rescaled so each score has exactly the declared variance.
  const bool pair = p2.has_value();
  c.betas_x.resize(m);
  c.betas_y1.resize(m);
  if (pair) c.betas_y2.resize(m);
  {
    Rng rng = Rng::stream(seed, kStreamBetas);
    if (pair) {
      const Eigen::Matrix3d l =
          chol3_corr(p1.rho_g, p2->rho_g, varphi_g, "simulate_snp_cohort effects");
      for (Eigen::Index j = 0; j < m; ++j) {
        const Eigen::Vector3d z(rng.normal(), rng.normal(), rng.normal());
        const Eigen::Vector3d e = l * z;
        c.betas_x(j) = e(0);
        c.betas_y1(j) = e(1);
        c.betas_y2(j) = e(2);
      }
    } else {
      const double r = p1.rho_g;
      const double t = std::sqrt(std::max(0.0, 1.0 - r * r));
      for (Eigen::Index j = 0; j < m; ++j) {
        const double z1 = rng.normal();
        const double z2 = rng.normal();
        c.betas_x(j) = z1;
        c.betas_y1(j) = r * z1 + t * z2;
      }
    }
    auto rescale = [](Eigen::VectorXd& b, double h2) {
      const double ss = b.squaredNorm();
      if (h2 <= 0.0 || !(ss > 0.0)) {
        b.setZero();
        return;
      }
      b *= std::sqrt(h2 / ss);
    };
    rescale(c.betas_x, part.h2_x);
    rescale(c.betas_y1, p1.h2_y);
    if (pair) rescale(c.betas_y2, p2->h2_y);
  }

  // Genotypes and genetic scores.
  c.genotypes.resize(n, m);
  Eigen::VectorXd gx = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd gy1 = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd gy2 = pair ? Eigen::VectorXd::Zero(n) : Eigen::VectorXd();

  auto add_snp_scores = [&](Eigen::Index j) {
    const double f = c.freqs(j);
    const double mu = 2.0 * f;
    const double sd = std::sqrt(2.0 * f * (1.0 - f));
    const double wx = c.betas_x(j) / sd;
    const double wy1 = c.betas_y1(j) / sd;
    const double wy2 = pair ? c.betas_y2(j) / sd : 0.0;
    const std::int8_t* col = c.genotypes.col(j).data();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = static_cast<double>(col[i]) - mu;
      gx(i) += wx * d;
      gy1(i) += wy1 * d;
      if (pair) gy2(i) += wy2 * d;
    }
  };

  if (cfg.ld_block_size == 1) {
    for (Eigen::Index j = 0; j < m; ++j) {
      Rng rng = Rng::stream(iseed, snp_stream(j));
      const double f = c.freqs(j);
      const double q0 = (1.0 - f) * (1.0 - f);
      const double q01 = q0 + 2.0 * f * (1.0 - f);
      std::int8_t* col = c.genotypes.col(j).data();
      for (Eigen::Index i = 0; i < n; ++i) {
        const double u = rng.uniform();
        col[i] = u < q0 ? 0 : (u < q01 ? 1 : 2);
      }
      add_snp_scores(j);
    }
  } else {
    // Within-block LD through a shared latent gamete factor: each gamete's
    // allele indicator thresholds a Gaussian correlated with its block factor,
    // so allele frequencies (and HWE) are preserved. The latent correlation
    // ramps linearly across blocks up to ld_block_rho, which spreads the LD
    // scores out; a free-intercept LD score regression needs that leverage.
    const Eigen::Index bs = cfg.ld_block_size;
    const Eigen::Index n_ld_blocks = m / bs;
    Eigen::VectorXd f0(n), f1(n);
    for (Eigen::Index b = 0; b < n_ld_blocks; ++b) {
      const double rho_b =
          n_ld_blocks == 1 ? cfg.ld_block_rho
                           : cfg.ld_block_rho * static_cast<double>(b) /
                                 static_cast<double>(n_ld_blocks - 1);
      const double sr = std::sqrt(rho_b);
      const double se = std::sqrt(1.0 - rho_b);
      Rng frng = Rng::stream(iseed, block_stream(b));
      for (Eigen::Index i = 0; i < n; ++i) f0(i) = frng.normal();
      for (Eigen::Index i = 0; i < n; ++i) f1(i) = frng.normal();
      for (Eigen::Index jj = 0; jj < bs; ++jj) {
        const Eigen::Index j = b * bs + jj;
        Rng rng = Rng::stream(iseed, snp_stream(j));
        const double qf = std_normal_quantile(c.freqs(j));
        std::int8_t* col = c.genotypes.col(j).data();
        for (Eigen::Index i = 0; i < n; ++i) {
          const int a0 = (sr * f0(i) + se * rng.normal()) < qf ? 1 : 0;
          const int a1 = (sr * f1(i) + se * rng.normal()) < qf ? 1 : 0;
          col[i] = static_cast<std::int8_t>(a0 + a1);
        }
        add_snp_scores(j);
      }
    }
  }

  // Non-genetic components and phenotypes.
  c.x.resize(n);
  c.y1.resize(n);
  if (pair) c.y2.resize(n);
  {
    Rng rng = Rng::stream(iseed, kStreamEps);
    const double sx = std::sqrt(1.0 - part.h2_x);
    const double s1 = std::sqrt(1.0 - p1.h2_y);
    if (pair) {
      const double s2 = std::sqrt(1.0 - p2->h2_y);
      const Eigen::Matrix3d l =
          chol3_corr(p1.rho_e, p2->rho_e, varphi_e, "simulate_snp_cohort residuals");
      for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Vector3d z(rng.normal(), rng.normal(), rng.normal());
        const Eigen::Vector3d e = l * z;
        c.x(i) = gx(i) + sx * e(0);
        c.y1(i) = gy1(i) + s1 * e(1);
        c.y2(i) = gy2(i) + s2 * e(2);
      }
    } else {
      const double r = p1.rho_e;
      const double t = std::sqrt(std::max(0.0, 1.0 - r * r));
      for (Eigen::Index i = 0; i < n; ++i) {
        const double z1 = rng.normal();
        const double z2 = rng.normal();
        c.x(i) = gx(i) + sx * z1;
        c.y1(i) = gy1(i) + s1 * (r * z1 + t * z2);
      }
    }
  }

  c.selected = sel.no_selection() ? BoolArray::Constant(n, true)
                                  : (c.x.array() > sel.t_alpha).eval();
  return c;
}

std::string snp_id(Eigen::Index j) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "snp%06lld", static_cast<long long>(j + 1));
  return buf;
}

GwasResult gwas_impl(const SnpCohort& c, Trait trait, bool selected_only) {
  const Eigen::VectorXd* pheno = nullptr;
  std::string name;
  switch (trait) {
    case Trait::X: pheno = &c.x; name = "x"; break;
    case Trait::Y1: pheno = &c.y1; name = "y1"; break;
    case Trait::Y2:
      if (!c.has_pair()) throw InputError("gwas: cohort has no second phenotype");
      pheno = &c.y2;
      name = "y2";
      break;
  }
  std::vector<Eigen::Index> rows;
  rows.reserve(static_cast<std::size_t>(c.x.size()));
  for (Eigen::Index i = 0; i < c.x.size(); ++i) {
    if (!selected_only || c.selected(i)) rows.push_back(i);
  }
  const auto ns = static_cast<double>(rows.size());
  if (ns < 3.0) throw NumericError("gwas: fewer than 3 usable rows");

  double sy = 0.0, syy = 0.0;
  for (const Eigen::Index i : rows) {
    sy += (*pheno)(i);
    syy += (*pheno)(i) * (*pheno)(i);
  }
  const double my = sy / ns;
  const double vy = syy - ns * my * my;
  if (!(vy > 0.0)) throw NumericError("gwas: phenotype has zero variance");

  GwasResult out;
  out.stats.trait = name;
  const Eigen::Index m = c.cfg.m;
  out.stats.snp.reserve(static_cast<std::size_t>(m));
  out.stats.a1.assign(static_cast<std::size_t>(m), "A");
  out.stats.a2.assign(static_cast<std::size_t>(m), "G");
  out.stats.n = Eigen::VectorXd::Constant(m, ns);
  out.stats.z.resize(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    out.stats.snp.push_back(snp_id(j));
    const std::int8_t* col = c.genotypes.col(j).data();
    double sg = 0.0, sgg = 0.0, sgy = 0.0;
    for (const Eigen::Index i : rows) {
      const double g = static_cast<double>(col[i]);
      sg += g;
      sgg += g * g;
      sgy += g * (*pheno)(i);
    }
    const double vg = sgg - sg * sg / ns;
    if (!(vg > 0.0)) {
      out.stats.z(j) = 0.0;
      out.monomorphic.push_back(j);
      continue;
    }
    const double cgy = sgy - sg * my;
    const double r = cgy / std::sqrt(vg * vy);
    const double r2 = std::min(r * r, 1.0 - 1e-12);
    out.stats.z(j) = r * std::sqrt((ns - 2.0) / (1.0 - r2));
  }
  return out;
}

}  // namespace

SnpCohort simulate_snp_cohort(const ParticipationParams& part, const PhenotypeParams& y,
                              const SelectionContext& sel, const SnpCohortConfig& cfg,
                              std::uint64_t seed) {
  return simulate_snp_impl(part, y, std::nullopt, 0.0, 0.0, sel, cfg, seed);
}

SnpCohort simulate_snp_cohort(const ParticipationParams& part, const PairParams& pair,
                              const SelectionContext& sel, const SnpCohortConfig& cfg,
                              std::uint64_t seed) {
  return simulate_snp_impl(part, pair.y1, pair.y2, pair.varphi_g, pair.varphi_e, sel, cfg,
                           seed);
}

GwasResult gwas_on_selected(const SnpCohort& cohort, Trait trait) {
  return gwas_impl(cohort, trait, true);
}

GwasResult gwas_on_all(const SnpCohort& cohort, Trait trait) {
  return gwas_impl(cohort, trait, false);
}

LdScores snp_ld_scores(const SnpCohort& cohort) {
  const Eigen::Index m = cohort.cfg.m;
  LdScores ld;
  ld.snp.reserve(static_cast<std::size_t>(m));
  for (Eigen::Index j = 0; j < m; ++j) ld.snp.push_back(snp_id(j));
  if (cohort.cfg.ld_block_size == 1) {
    ld.l2 = Eigen::VectorXd::Ones(m);
    return ld;
  }
  // Bias-corrected empirical r^2 sums within each block.
  const Eigen::Index n = cohort.genotypes.rows();
  const Eigen::Index bs = cohort.cfg.ld_block_size;
  const double nn = static_cast<double>(n);
  ld.l2.resize(m);
  Eigen::MatrixXd block(n, bs);
  for (Eigen::Index b = 0; b < m / bs; ++b) {
    for (Eigen::Index jj = 0; jj < bs; ++jj) {
      block.col(jj) = cohort.genotypes.col(b * bs + jj).cast<double>();
      block.col(jj).array() -= block.col(jj).mean();
      const double norm = block.col(jj).norm();
      if (norm > 0.0) block.col(jj) /= norm;
    }
    const Eigen::MatrixXd corr = block.transpose() * block;
    for (Eigen::Index jj = 0; jj < bs; ++jj) {
      double l = 1.0;
      for (Eigen::Index kk = 0; kk < bs; ++kk) {
        if (kk == jj) continue;
        const double r2 = corr(jj, kk) * corr(jj, kk);
        l += r2 - (1.0 - r2) / (nn - 2.0);
      }
      ld.l2(b * bs + jj) = l;
    }
  }
  return ld;
}

}  // namespace pb
