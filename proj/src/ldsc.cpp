#include "pb/ldsc.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "pb/errors.hpp"

namespace pb {

namespace {

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

std::unordered_map<std::string, Eigen::Index> index_by_snp(const std::vector<std::string>& ids) {
  std::unordered_map<std::string, Eigen::Index> map;
  map.reserve(ids.size() * 2);
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(ids.size()); ++i) {
    if (!map.emplace(ids[static_cast<std::size_t>(i)], i).second) {
      throw InputError("duplicate SNP identifier: " + ids[static_cast<std::size_t>(i)]);
    }
  }
  return map;
}

// Accumulates per-block WLS statistics for (x, y, w) vectors.
std::vector<WlsStat> accumulate_blocks(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                                       const Eigen::VectorXd& w, int n_blocks) {
  const auto ranges = block_ranges(x.size(), n_blocks);
  std::vector<WlsStat> blocks(ranges.size());
  for (std::size_t b = 0; b < ranges.size(); ++b) {
    WlsStat& s = blocks[b];
    for (Eigen::Index j = ranges[b].first; j < ranges[b].second; ++j) {
      const double wj = w(j);
      s.sw += wj;
      s.swx += wj * x(j);
      s.swxx += wj * x(j) * x(j);
      s.swy += wj * y(j);
      s.swxy += wj * x(j) * y(j);
      s.count += 1.0;
    }
  }
  return blocks;
}

}  // namespace

WlsFit solve_wls(const WlsStat& s) {
  const double det = s.sw * s.swxx - s.swx * s.swx;
  // Relative guard: with constant LD scores and equal sample sizes the
  // regressor has no variance and intercept/slope cannot be separated.
  if (!(s.sw > 0.0) || !(det > 1e-12 * s.sw * s.swxx)) {
    throw NumericError(
        "regression has no leverage (constant N*l/m); fix the intercept or use "
        "LD scores that vary across SNPs");
  }
  WlsFit fit;
  fit.slope = (s.sw * s.swxy - s.swx * s.swy) / det;
  fit.intercept = (s.swy - fit.slope * s.swx) / s.sw;
  return fit;
}

double solve_wls_slope(const WlsStat& s, double intercept) {
  if (!(s.swxx > 0.0)) {
    throw NumericError("weighted regression is singular (zero x variance)");
  }
  return (s.swxy - intercept * s.swx) / s.swxx;
}

Panel build_panel(const std::vector<SumStats>& stats, const LdScores& ld) {
  if (stats.empty()) throw InputError("build_panel: no summary statistics supplied");
  for (const auto& s : stats) {
    if (s.size() < 2) throw InputError("summary statistics for " + s.trait + " have < 2 SNPs");
  }
  const auto ld_idx = index_by_snp(ld.snp);
  std::vector<std::unordered_map<std::string, Eigen::Index>> idx;
  idx.reserve(stats.size());
  for (const auto& s : stats) idx.push_back(index_by_snp(s.snp));

  const SumStats& ref = stats.front();
  std::vector<Eigen::Index> keep;          // rows of ref present everywhere
  std::vector<std::vector<Eigen::Index>> rows(stats.size());
  std::vector<std::vector<double>> sign(stats.size());
  std::vector<std::string> mismatched;

  for (Eigen::Index i = 0; i < ref.size(); ++i) {
    const std::string& id = ref.snp[static_cast<std::size_t>(i)];
    if (!ld_idx.count(id)) continue;
    bool everywhere = true;
    std::vector<Eigen::Index> r(stats.size());
    std::vector<double> sg(stats.size(), 1.0);
    for (std::size_t k = 0; k < stats.size(); ++k) {
      auto it = idx[k].find(id);
      if (it == idx[k].end()) { everywhere = false; break; }
      r[k] = it->second;
      const auto j = static_cast<std::size_t>(it->second);
      const auto i0 = static_cast<std::size_t>(i);
      if (stats[k].a1[j] == ref.a1[i0] && stats[k].a2[j] == ref.a2[i0]) {
        sg[k] = 1.0;
      } else if (stats[k].a1[j] == ref.a2[i0] && stats[k].a2[j] == ref.a1[i0]) {
        sg[k] = -1.0;  // swapped orientation: flip z
      } else {
        mismatched.push_back(id);
        everywhere = false;
        break;
      }
    }
    if (!everywhere) continue;
    keep.push_back(i);
    for (std::size_t k = 0; k < stats.size(); ++k) {
      rows[k].push_back(r[k]);
      sign[k].push_back(sg[k]);
    }
  }

  if (!mismatched.empty()) {
    std::string msg = "allele mismatch for " + std::to_string(mismatched.size()) + " SNP(s):";
    for (std::size_t i = 0; i < std::min<std::size_t>(mismatched.size(), 10); ++i) {
      msg += " " + mismatched[i];
    }
    throw InputError(msg);
  }
  if (keep.size() < 2) {
    throw InputError("fewer than 2 SNPs shared by all summary statistics and LD scores");
  }

  Panel panel;
  const Eigen::Index n = static_cast<Eigen::Index>(keep.size());
  panel.snp.reserve(keep.size());
  panel.l2.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::string& id = ref.snp[static_cast<std::size_t>(keep[static_cast<std::size_t>(i)])];
    panel.snp.push_back(id);
    panel.l2(i) = ld.l2(ld_idx.at(id));
    if (!(panel.l2(i) > 0.0)) throw InputError("non-positive LD score for SNP " + id);
  }
  panel.traits.reserve(stats.size());
  for (std::size_t k = 0; k < stats.size(); ++k) {
    panel.traits.push_back(stats[k].trait);
    Eigen::VectorXd zk(n), nk(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index r = rows[k][static_cast<std::size_t>(i)];
      zk(i) = sign[k][static_cast<std::size_t>(i)] * stats[k].z(r);
      nk(i) = stats[k].n(r);
      if (!std::isfinite(zk(i))) {
        throw InputError("non-finite z for SNP " + panel.snp[static_cast<std::size_t>(i)] +
                         " in " + stats[k].trait);
      }
      if (!(nk(i) >= 2.0)) {
        throw InputError("sample size < 2 for SNP " + panel.snp[static_cast<std::size_t>(i)] +
                         " in " + stats[k].trait);
      }
    }
    panel.z.push_back(std::move(zk));
    panel.n.push_back(std::move(nk));
  }
  return panel;
}

std::vector<WlsStat> h2_regression_blocks(const Panel& panel, Eigen::Index trait,
                                          std::int64_t m, const LdscOptions& opts) {
  if (m <= 0) throw InputError("LDSC m must be positive");
  const Eigen::VectorXd& z = panel.z[static_cast<std::size_t>(trait)];
  const Eigen::VectorXd& n = panel.n[static_cast<std::size_t>(trait)];
  const Eigen::VectorXd x =
      (n.array() * panel.l2.array() / static_cast<double>(m)).matrix();
  const Eigen::VectorXd y = z.array().square().matrix();

  // Two-step weights 1/(1 + N*l*h2/m)^2, first from a moment guess, then from
  // the step-1 slope. Weights stay fixed across jackknife blocks.
  double guess = clamp01((y.mean() - 1.0) / std::max(x.mean(), 1e-12));
  Eigen::VectorXd w(y.size());
  for (int step = 0; step < 2; ++step) {
    w = (1.0 + guess * x.array()).square().inverse().matrix();
    WlsStat s;
    for (Eigen::Index j = 0; j < y.size(); ++j) {
      s.sw += w(j); s.swx += w(j) * x(j); s.swxx += w(j) * x(j) * x(j);
      s.swy += w(j) * y(j); s.swxy += w(j) * x(j) * y(j); s.count += 1.0;
    }
    const double slope =
        opts.fix_intercept ? solve_wls_slope(s, opts.intercept_value) : solve_wls(s).slope;
    guess = clamp01(slope);
  }
  return accumulate_blocks(x, y, w, opts.n_blocks);
}

namespace {

// Two-step weights for the z1*z2 regression: per-SNP expected chi^2 of each
// trait plus the squared expected product term from the step-1 slope.
Eigen::VectorXd gcov_weights(const Panel& panel, Eigen::Index t1, Eigen::Index t2,
                             std::int64_t m, const LdscOptions& opts) {
  const auto i1 = static_cast<std::size_t>(t1);
  const auto i2 = static_cast<std::size_t>(t2);
  const Eigen::VectorXd x =
      ((panel.n[i1].array() * panel.n[i2].array()).sqrt() * panel.l2.array() /
       static_cast<double>(m))
          .matrix();
  const Eigen::VectorXd y = (panel.z[i1].array() * panel.z[i2].array()).matrix();

  auto expected_chi2 = [&](std::size_t t) {
    std::vector<WlsStat> blocks =
        h2_regression_blocks(panel, static_cast<Eigen::Index>(t), m, opts);
    WlsStat pooled;
    for (const auto& b : blocks) pooled += b;
    const double h2 =
        clamp01(opts.fix_intercept ? solve_wls_slope(pooled, opts.intercept_value)
                                   : solve_wls(pooled).slope);
    return (1.0 + h2 * (panel.n[t].array() * panel.l2.array() / static_cast<double>(m)))
        .eval();
  };
  const auto c1 = expected_chi2(i1);
  const auto c2 = expected_chi2(i2);

  double g_guess = 0.0;
  Eigen::VectorXd w(y.size());
  for (int step = 0; step < 2; ++step) {
    w = (c1 * c2 + (g_guess * x.array()).square()).inverse().matrix();
    WlsStat s;
    for (Eigen::Index j = 0; j < y.size(); ++j) {
      s.sw += w(j); s.swx += w(j) * x(j); s.swxx += w(j) * x(j) * x(j);
      s.swy += w(j) * y(j); s.swxy += w(j) * x(j) * y(j); s.count += 1.0;
    }
    g_guess = opts.fix_intercept ? solve_wls_slope(s, opts.intercept_value)
                                 : solve_wls(s).slope;
  }
  return w;
}

// chi^2-on-N*l/m blocks with a caller-supplied weight vector.
std::vector<WlsStat> weighted_chi2_blocks(const Panel& panel, Eigen::Index trait,
                                          std::int64_t m, const Eigen::VectorXd& w,
                                          int n_blocks) {
  const auto t = static_cast<std::size_t>(trait);
  const Eigen::VectorXd x =
      (panel.n[t].array() * panel.l2.array() / static_cast<double>(m)).matrix();
  const Eigen::VectorXd y = panel.z[t].array().square().matrix();
  return accumulate_blocks(x, y, w, n_blocks);
}

}  // namespace

std::vector<WlsStat> gcov_regression_blocks(const Panel& panel, Eigen::Index t1,
                                            Eigen::Index t2, std::int64_t m,
                                            const LdscOptions& opts) {
  if (m <= 0) throw InputError("LDSC m must be positive");
  const auto i1 = static_cast<std::size_t>(t1);
  const auto i2 = static_cast<std::size_t>(t2);
  const Eigen::VectorXd x =
      ((panel.n[i1].array() * panel.n[i2].array()).sqrt() * panel.l2.array() /
       static_cast<double>(m))
          .matrix();
  const Eigen::VectorXd y = (panel.z[i1].array() * panel.z[i2].array()).matrix();
  return accumulate_blocks(x, y, gcov_weights(panel, t1, t2, m, opts), opts.n_blocks);
}

LdscH2 ldsc_h2(const SumStats& stats, const LdScores& ld, std::int64_t m,
               const LdscOptions& opts) {
  const Panel panel = build_panel({stats}, ld);
  LdscH2 out;
  out.blocks = h2_regression_blocks(panel, 0, m, opts);
  out.jk = block_jackknife(out.blocks, [&](const WlsStat& s) {
    Eigen::VectorXd v(2);
    if (opts.fix_intercept) {
      v(0) = solve_wls_slope(s, opts.intercept_value);
      v(1) = opts.intercept_value;
    } else {
      const WlsFit fit = solve_wls(s);
      v(0) = fit.slope;
      v(1) = fit.intercept;
    }
    return v;
  });
  out.h2 = out.jk.estimate(0);
  out.h2_se = out.jk.se(0);
  out.intercept = out.jk.estimate(1);
  out.intercept_se = out.jk.se(1);
  out.n_bar = panel.n[0].mean();
  out.m = m;
  out.n_snps = panel.n_snps();
  return out;
}

namespace {

// Composed block statistics for the genetic-correlation jackknife.
struct GcorStat {
  WlsStat h2_1, h2_2, gcov;
  GcorStat& operator+=(const GcorStat& o) {
    h2_1 += o.h2_1; h2_2 += o.h2_2; gcov += o.gcov;
    return *this;
  }
  GcorStat& operator-=(const GcorStat& o) {
    h2_1 -= o.h2_1; h2_2 -= o.h2_2; gcov -= o.gcov;
    return *this;
  }
};

}  // namespace

LdscGcov ldsc_gcov(const SumStats& stats1, const SumStats& stats2, const LdScores& ld,
                   std::int64_t m, const LdscOptions& opts) {
  const Panel panel = build_panel({stats1, stats2}, ld);
  // The denominator heritabilities reuse the product-regression weights, so a
  // file paired with itself yields correlation exactly 1.
  const Eigen::VectorXd w = gcov_weights(panel, 0, 1, m, opts);
  const Eigen::VectorXd x12 =
      ((panel.n[0].array() * panel.n[1].array()).sqrt() * panel.l2.array() /
       static_cast<double>(m))
          .matrix();
  const Eigen::VectorXd y12 = (panel.z[0].array() * panel.z[1].array()).matrix();
  const auto bg = accumulate_blocks(x12, y12, w, opts.n_blocks);
  const auto b1 = weighted_chi2_blocks(panel, 0, m, w, opts.n_blocks);
  const auto b2 = weighted_chi2_blocks(panel, 1, m, w, opts.n_blocks);

  std::vector<GcorStat> blocks(bg.size());
  for (std::size_t b = 0; b < bg.size(); ++b) {
    blocks[b] = GcorStat{b1[b], b2[b], bg[b]};
  }
  auto est = [&](const GcorStat& s) {
    Eigen::VectorXd v(3);
    double intercept;
    double gcov;
    if (opts.fix_intercept) {
      // Fixed cross-trait intercept means no sample overlap: zero.
      intercept = 0.0;
      gcov = solve_wls_slope(s.gcov, intercept);
    } else {
      const WlsFit fit = solve_wls(s.gcov);
      gcov = fit.slope;
      intercept = fit.intercept;
    }
    const double h2a = opts.fix_intercept ? solve_wls_slope(s.h2_1, opts.intercept_value)
                                          : solve_wls(s.h2_1).slope;
    const double h2b = opts.fix_intercept ? solve_wls_slope(s.h2_2, opts.intercept_value)
                                          : solve_wls(s.h2_2).slope;
    const double denom = h2a * h2b;
    if (!(denom > 0.0)) {
      throw NumericError("genetic correlation undefined: non-positive h2 product");
    }
    v(0) = gcov;
    v(1) = gcov / std::sqrt(denom);
    v(2) = intercept;
    return v;
  };

  LdscGcov out;
  out.jk = block_jackknife(blocks, est);
  out.gcov = out.jk.estimate(0);
  out.gcov_se = out.jk.se(0);
  out.gcor = out.jk.estimate(1);
  out.gcor_se = out.jk.se(1);
  out.intercept = out.jk.estimate(2);
  out.intercept_se = out.jk.se(2);
  {
    WlsStat p1, p2;
    for (const auto& s : b1) p1 += s;
    for (const auto& s : b2) p2 += s;
    out.h2_1 = opts.fix_intercept ? solve_wls_slope(p1, opts.intercept_value)
                                  : solve_wls(p1).slope;
    out.h2_2 = opts.fix_intercept ? solve_wls_slope(p2, opts.intercept_value)
                                  : solve_wls(p2).slope;
  }
  out.n_snps = panel.n_snps();
  return out;
}

}  // namespace pb
