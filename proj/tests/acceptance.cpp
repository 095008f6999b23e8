// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Tolerances are pinned in code next to each check.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <thread>
#include <vector>

#include "oracle.hpp"
#include "pb/adjust.hpp"
#include "pb/io.hpp"
#include "pb/jackknife.hpp"
#include "pb/ldsc.hpp"
#include "pb/model.hpp"
#include "pb/simgen.hpp"
#include "pb/truncnorm.hpp"

using namespace pb;

namespace {

namespace fs = std::filesystem;

struct Criterion {
  bool pass = true;
  std::string detail;
};

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Round-trip exactness: forward bias formulas -> adjustment chain recovers
//    the population parameters to 1e-10 over a PSD-valid grid, in under 10 s.

Criterion criterion_round_trip() {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<double> alphas = {0.02, 0.055, 0.1, 0.25, 0.5, 1.0};
  double max_err = 0.0;
  int points = 0;
  bool alpha1_flagged = true;
  for (double h2x : {0.05, 0.125, 0.3, 0.6}) {
    const ParticipationParams part{h2x};
    for (double h2y1 : {0.1, 0.5, 0.9}) {
      for (double rg1 : {-0.6, -0.2, 0.3}) {
        for (double re1 : {-0.4, 0.0, 0.5}) {
          for (double rg2 : {-0.3, 0.2}) {
            for (double re2 : {0.0, 0.4}) {
              for (double vg : {-0.4, 0.1, 0.6}) {
                const PhenotypeParams y1{h2y1, rg1, re1};
                const PhenotypeParams y2{0.4, rg2, re2};
                const PairParams pair{y1, y2, vg, 0.2};
                if (!pair_params_valid(pair)) continue;
                ++points;
                for (double alpha : alphas) {
                  const SelectionContext sel = make_selection_context(alpha);
                  SampleEstimates est;
                  est.alpha = alpha;
                  est.h2_x_hat = h2x;
                  est.y1 = PhenotypeEstimates{apparent_h2(part, y1, sel),
                                              apparent_participation_gcor(part, y1, sel),
                                              mean_shift(part, y1, sel)};
                  est.y2 = PhenotypeEstimates{apparent_h2(part, y2, sel),
                                              apparent_participation_gcor(part, y2, sel),
                                              mean_shift(part, y2, sel)};
                  est.varphi_g_hat = apparent_pair_gcor(part, pair, sel);
                  const AdjustedPair adj = adjust_pair(est, sel);
                  max_err = std::max(max_err, std::abs(adj.y1.h2_y_tilde - h2y1));
                  max_err = std::max(max_err, std::abs(adj.y1.rho_g_tilde - rg1));
                  max_err = std::max(max_err, std::abs(adj.varphi_g_tilde - vg));
                  if (alpha < 1.0) {
                    max_err = std::max(max_err, std::abs(adj.y1.rho_e_tilde - re1));
                  } else {
                    // No selection means no mean shift, so the phenotypic
                    // correlation carries no signal and rho_e has no
                    // estimator; the chain must flag this explicitly.
                    alpha1_flagged = alpha1_flagged && std::isnan(adj.y1.rho_e_tilde) &&
                                     !adj.y1.warnings.empty();
                  }
                }
              }
            }
          }
        }
      }
    }
  }
  const double elapsed = seconds_since(t0);
  Criterion c;
  c.pass = points >= 500 && max_err <= 1e-10 && alpha1_flagged && elapsed < 10.0;
  c.detail = std::to_string(points) + " PSD grid points x 6 alphas, max abs error " +
             fmt(max_err) + " (tol 1e-10); rho_e at alpha=1 flagged not identifiable: " +
             (alpha1_flagged ? "yes" : "NO") + "; " + fmt(elapsed) + " s (limit 10)";
  return c;
}

// ---------------------------------------------------------------------------
// 2. Truncation identity against quadrature, plus the half-normal value.

Criterion criterion_truncation_identity() {
  double max_err = 0.0;
  for (int i = 1; i <= 99; ++i) {
    const double alpha = i / 100.0;
    const double t = oracle::threshold_for_alpha(alpha);
    const double var = oracle::truncated_moments(t).variance;
    max_err = std::max(max_err, std::abs((1.0 - make_selection_context(alpha).xi) - var));
  }
  const double half_err =
      std::abs(make_selection_context(0.5).xi - 2.0 / 3.14159265358979323846);
  Criterion c;
  c.pass = max_err <= 1e-8 && half_err <= 1e-12;
  c.detail = "max |(1-xi) - Var(X|X>t)| = " + fmt(max_err) +
             " over alpha 0.01..0.99 (tol 1e-8); |xi(0.5) - 2/pi| = " + fmt(half_err) +
             " (tol 1e-12)";
  return c;
}

// ---------------------------------------------------------------------------
// 3. MC oracle agreement at n = 1e6 for the reference parameter setting.

Criterion criterion_mc_agreement() {
  const auto t0 = std::chrono::steady_clock::now();
  const ParticipationParams part{0.125};
  const PhenotypeParams y{0.5, 0.3, 0.3};
  const PairParams pair = make_pair_params(y, y, 0.4, 0.2);
  Criterion c;
  std::ostringstream detail;
  for (double alpha : {0.05, 0.1, 0.25, 0.5}) {
    const SelectionContext sel = make_selection_context(alpha);
    const MvnCohort cohort =
        simulate_mvn(part, pair, sel, 1000000, 777000 + static_cast<int>(alpha * 1000));
    const JackknifeResult jk = empirical_sample_quantities_blocked(cohort, 100);
    const double closed_h2 = apparent_h2(part, y, sel);
    const double closed_rg = apparent_participation_gcor(part, y, sel);
    const double closed_phi = apparent_pair_gcor(part, pair, sel);
    const double closed_delta = mean_shift(part, y, sel);
    const double zh = std::abs(jk.estimate(0) - closed_h2) / jk.se(0);
    const double zr = std::abs(jk.estimate(1) - closed_rg) / jk.se(1);
    const double zd = std::abs(jk.estimate(2) - closed_delta) / jk.se(2);
    const double zp = std::abs(jk.estimate(6) - closed_phi) / jk.se(6);
    if (zh > 3.0 || zr > 3.0 || zd > 3.0 || zp > 3.0) c.pass = false;
    detail << "alpha=" << alpha << " z(h2,rho_g,delta,phi_g)=(" << fmt(zh) << ","
           << fmt(zr) << "," << fmt(zd) << "," << fmt(zp) << ") ";
  }
  const double elapsed = seconds_since(t0);
  if (elapsed >= 120.0) c.pass = false;
  c.detail = detail.str() + "within 3 MC SEs; " + fmt(elapsed) + " s (limit 120)";
  return c;
}

// ---------------------------------------------------------------------------
// 4. Direction of bias.

Criterion criterion_bias_direction() {
  const ParticipationParams part{0.125};
  Criterion c;
  std::string why;
  for (double alpha : {0.02, 0.055, 0.1, 0.25, 0.5}) {
    const SelectionContext sel = make_selection_context(alpha);
    for (double r : {0.2, 0.4, 0.7}) {
      if (!(apparent_h2(part, PhenotypeParams{0.5, r, 0.0}, sel) <= 0.5 + 1e-12)) {
        c.pass = false;
        why = "pure-genetic case not downward";
      }
      if (!(apparent_h2(part, PhenotypeParams{0.5, 0.0, r}, sel) >= 0.5 - 1e-12)) {
        c.pass = false;
        why = "pure-non-genetic case not upward";
      }
      const double flipped =
          apparent_participation_gcor(part, PhenotypeParams{0.5, 0.0, r}, sel);
      const double flipped_neg =
          apparent_participation_gcor(part, PhenotypeParams{0.5, 0.0, -r}, sel);
      if (!(flipped < 0.0 && flipped_neg > 0.0)) {
        c.pass = false;
        why = "collider sign reversal violated";
      }
    }
    // delta strictly monotone in rho.
    double prev = -1e300;
    for (double rg = -0.9; rg <= 0.91; rg += 0.05) {
      const double d = mean_shift(part, PhenotypeParams{0.5, rg, rg}, sel);
      if (!(d > prev)) {
        c.pass = false;
        why = "delta not strictly increasing in rho";
      }
      prev = d;
    }
  }
  c.detail = c.pass ? "pure-genetic downward, pure-non-genetic upward, collider sign "
                      "reversal, delta strictly monotone in rho"
                    : why;
  return c;
}

// ---------------------------------------------------------------------------
// 5 + 6. End-to-end SNP-level replicates: adjusted beats unadjusted, LDSC
//        matches the closed forms on average, and the jackknife SE of the
//        adjusted h2 tracks the replicate SD.

struct RepResult {
  double h2_hat = 0, h2_adj = 0, h2_se = 0, h2_adj_se = 0;
  double rg_hat = 0, rg_adj = 0, rg_se = 0;
  double phi_hat = 0, phi_adj = 0, phi_se = 0;
  bool ok = false;
  std::string error;
};

struct ChainBlocks {
  WlsStat h2a, h2b, gxa, gxb, gab;
  ChainBlocks& operator+=(const ChainBlocks& o) {
    h2a += o.h2a; h2b += o.h2b; gxa += o.gxa; gxb += o.gxb; gab += o.gab;
    return *this;
  }
  ChainBlocks& operator-=(const ChainBlocks& o) {
    h2a -= o.h2a; h2b -= o.h2b; gxa -= o.gxa; gxb -= o.gxb; gab -= o.gab;
    return *this;
  }
};

// Parameter choice: same-sign genetic and non-genetic correlations, so the
// apparent heritability is strongly biased upward (+0.155) and the apparent
// participation correlation is collider-shrunk toward zero (bias -0.246),
// both far beyond the replicate-level noise.
struct EndToEndScenario {
  ParticipationParams part{0.125};
  PhenotypeParams y1{0.5, 0.3, 0.8};
  PhenotypeParams y2{0.5, 0.2, 0.3};
  double varphi_g = 0.4;
  double varphi_e = 0.2;
  double alpha = 0.1;
  Eigen::Index n = 50000;
  Eigen::Index m = 5000;
  Eigen::Index n_reference = 20000;  // independent cohort for the participation GWAS
  int reps = 100;
};

RepResult run_replicate(const EndToEndScenario& sc, std::uint64_t seed) {
  RepResult r;
  try {
    const SelectionContext sel = make_selection_context(sc.alpha);
    const PairParams pair{sc.y1, sc.y2, sc.varphi_g, sc.varphi_e};
    SnpCohortConfig cfg;
    cfg.n = sc.n;
    cfg.m = sc.m;
    cfg.ld_block_size = 10;
    cfg.ld_block_rho = 0.95;
    const SnpCohort cohort = simulate_snp_cohort(sc.part, pair, sel, cfg, seed);
    // Participation statistics come from an independent cohort with the same
    // genetic architecture (the external participation GWAS has no sample
    // overlap with the phenotype GWAS, so its cross-trait intercept is zero).
    SnpCohortConfig ref_cfg = cfg;
    ref_cfg.n = sc.n_reference;
    ref_cfg.individuals_salt = 0x5eedful;
    const SnpCohort reference = simulate_snp_cohort(sc.part, pair, sel, ref_cfg, seed);

    const SumStats sx = gwas_on_all(reference, Trait::X).stats;
    const SumStats s1 = gwas_on_selected(cohort, Trait::Y1).stats;
    const SumStats s2 = gwas_on_selected(cohort, Trait::Y2).stats;
    const LdScores ld = snp_ld_scores(cohort);

    // Empirical mean shifts, participants against the full cohort.
    auto delta_of = [&](const Eigen::VectorXd& y) {
      double sum_all = 0, sum_sel = 0, sumsq_sel = 0;
      Eigen::Index k = 0;
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        sum_all += y(i);
        if (cohort.selected(i)) { sum_sel += y(i); sumsq_sel += y(i) * y(i); ++k; }
      }
      const double dk = static_cast<double>(k);
      const double mean_sel = sum_sel / dk;
      const double sd = std::sqrt((sumsq_sel - dk * mean_sel * mean_sel) / (dk - 1.0));
      return (mean_sel - sum_all / static_cast<double>(y.size())) / sd;
    };
    const double delta1 = delta_of(cohort.y1);
    const double delta2 = delta_of(cohort.y2);

    const Panel panel = build_panel({sx, s1, s2}, ld);
    // In this simulation there is no confounding, so the chi^2 intercepts are
    // fixed at 1, and the participation statistics share no samples with the
    // phenotype GWAS, so those cross intercepts are fixed at 0. The y1-y2
    // regression keeps a free intercept (complete sample overlap).
    LdscOptions fix1;
    fix1.n_blocks = 200;
    fix1.fix_intercept = true;
    LdscOptions fix0 = fix1;
    fix0.intercept_value = 0.0;
    LdscOptions free_opts;
    free_opts.n_blocks = 200;
    const std::int64_t m = sc.m;
    const auto h2a = h2_regression_blocks(panel, 1, m, fix1);
    const auto h2b = h2_regression_blocks(panel, 2, m, fix1);
    const auto gxa = gcov_regression_blocks(panel, 0, 1, m, fix0);
    const auto gxb = gcov_regression_blocks(panel, 0, 2, m, fix0);
    const auto gab = gcov_regression_blocks(panel, 1, 2, m, free_opts);
    std::vector<ChainBlocks> blocks(h2a.size());
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      blocks[b] = ChainBlocks{h2a[b], h2b[b], gxa[b], gxb[b], gab[b]};
    }

    const double h2x = sc.part.h2_x;  // external input: the true value
    auto est_all = [&](const ChainBlocks& stat) {
      const double h2_1 = solve_wls_slope(stat.h2a, 1.0);
      const double h2_2 = solve_wls_slope(stat.h2b, 1.0);
      const double g1 = solve_wls_slope(stat.gxa, 0.0);
      const double g2 = solve_wls_slope(stat.gxb, 0.0);
      const double g12 = solve_wls(stat.gab).slope;
      if (!(h2_1 > 0.0 && h2_2 > 0.0)) throw NumericError("non-positive h2 in pool");
      const double dx = 1.0 - sel.xi * h2x;
      const double rg1 = g1 / std::sqrt(dx * h2x * h2_1);
      const double rg2 = g2 / std::sqrt(dx * h2x * h2_2);
      const double phi = g12 / std::sqrt(h2_1 * h2_2);
      SampleEstimates est;
      est.alpha = sc.alpha;
      est.h2_x_hat = h2x;
      est.y1 = PhenotypeEstimates{h2_1, rg1, delta1};
      est.y2 = PhenotypeEstimates{h2_2, rg2, delta2};
      est.varphi_g_hat = phi;
      const AdjustedPair adj = adjust_pair(est, sel);
      Eigen::VectorXd v(6);
      v << h2_1, adj.y1.h2_y_tilde, rg1, adj.y1.rho_g_tilde, phi, adj.varphi_g_tilde;
      return v;
    };
    const JackknifeResult jk = block_jackknife(blocks, est_all);
    r.h2_hat = jk.estimate(0);
    r.h2_adj = jk.estimate(1);
    r.h2_se = jk.se(0);
    r.h2_adj_se = jk.se(1);
    r.rg_hat = jk.estimate(2);
    r.rg_adj = jk.estimate(3);
    r.rg_se = jk.se(2);
    r.phi_hat = jk.estimate(4);
    r.phi_adj = jk.estimate(5);
    r.phi_se = jk.se(4);
    r.ok = true;
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  return r;
}

struct EndToEndSummary {
  std::vector<RepResult> reps;
  double elapsed = 0.0;
};

EndToEndSummary run_end_to_end(const EndToEndScenario& sc) {
  const auto t0 = std::chrono::steady_clock::now();
  EndToEndSummary out;
  out.reps.resize(static_cast<std::size_t>(sc.reps));
  const unsigned hw = std::thread::hardware_concurrency();
  const int workers = static_cast<int>(std::max(1u, std::min(hw, 4u)));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      for (int rep = w; rep < sc.reps; rep += workers) {
        out.reps[static_cast<std::size_t>(rep)] =
            run_replicate(sc, 555000 + static_cast<std::uint64_t>(rep));
      }
    });
  }
  for (auto& t : pool) t.join();
  out.elapsed = seconds_since(t0);
  return out;
}

struct MeanSd {
  double mean = 0, sd = 0;
};

MeanSd mean_sd(const std::vector<double>& v) {
  MeanSd out;
  for (double x : v) out.mean += x;
  out.mean /= static_cast<double>(v.size());
  for (double x : v) out.sd += (x - out.mean) * (x - out.mean);
  out.sd = std::sqrt(out.sd / static_cast<double>(v.size() - 1));
  return out;
}

void criterion_end_to_end(const EndToEndScenario& sc, const EndToEndSummary& sum,
                          Criterion& c5, Criterion& c6) {
  const SelectionContext sel = make_selection_context(sc.alpha);
  const PairParams pair{sc.y1, sc.y2, sc.varphi_g, sc.varphi_e};
  const double theory_h2 = apparent_h2(sc.part, sc.y1, sel);
  const double theory_rg = apparent_participation_gcor(sc.part, sc.y1, sel);
  const double theory_phi = apparent_pair_gcor(sc.part, pair, sel);

  std::vector<double> h2_hat, h2_adj, h2_se, h2_adj_se, rg_hat, rg_adj, rg_se, phi_hat,
      phi_se;
  int closer_h2 = 0, closer_rg = 0, failed = 0;
  for (const auto& r : sum.reps) {
    if (!r.ok) {
      ++failed;
      continue;
    }
    h2_hat.push_back(r.h2_hat);
    h2_adj.push_back(r.h2_adj);
    h2_se.push_back(r.h2_se);
    h2_adj_se.push_back(r.h2_adj_se);
    rg_hat.push_back(r.rg_hat);
    rg_adj.push_back(r.rg_adj);
    rg_se.push_back(r.rg_se);
    phi_hat.push_back(r.phi_hat);
    phi_se.push_back(r.phi_se);
    if (std::abs(r.h2_adj - sc.y1.h2_y) < std::abs(r.h2_hat - sc.y1.h2_y)) ++closer_h2;
    if (std::abs(r.rg_adj - sc.y1.rho_g) < std::abs(r.rg_hat - sc.y1.rho_g)) ++closer_rg;
  }
  const auto n_ok = static_cast<double>(h2_hat.size());
  const MeanSd mh = mean_sd(h2_hat);
  const MeanSd mr = mean_sd(rg_hat);
  const MeanSd mp = mean_sd(phi_hat);
  const MeanSd ma = mean_sd(h2_adj);

  // Qualifier: the closeness clause applies where the true bias exceeds 2 MC SEs.
  const double bias_h2 = std::abs(theory_h2 - sc.y1.h2_y);
  const double bias_rg = std::abs(theory_rg - sc.y1.rho_g);
  const bool qualifies_h2 = bias_h2 > 2.0 * mh.sd;
  const bool qualifies_rg = bias_rg > 2.0 * mr.sd;

  // LDSC sample-parameter agreement: ensemble means against the closed forms,
  // at the precision of the replicate ensemble (2 jackknife SEs of the mean).
  const double dev_h2 = std::abs(mh.mean - theory_h2);
  const double dev_rg = std::abs(mr.mean - theory_rg);
  const double dev_phi = std::abs(mp.mean - theory_phi);
  const double lim_h2 = 2.0 * mean_sd(h2_se).mean / std::sqrt(n_ok);
  const double lim_rg = 2.0 * mean_sd(rg_se).mean / std::sqrt(n_ok);
  const double lim_phi = 2.0 * mean_sd(phi_se).mean / std::sqrt(n_ok);

  const double frac_h2 = closer_h2 / n_ok;
  const double frac_rg = closer_rg / n_ok;

  c5.pass = failed == 0 && qualifies_h2 && qualifies_rg && frac_h2 >= 0.95 &&
            frac_rg >= 0.95 && dev_h2 <= lim_h2 && dev_rg <= lim_rg &&
            dev_phi <= lim_phi && sum.elapsed < 1800.0;
  std::ostringstream d5;
  d5 << "adjusted closer than unadjusted: h2 " << closer_h2 << "/" << n_ok << ", rho_g "
     << closer_rg << "/" << n_ok << " (need >= 95%); true bias (h2 " << fmt(bias_h2)
     << ", rho_g " << fmt(bias_rg) << ") vs 2 MC SE (" << fmt(2.0 * mh.sd) << ", "
     << fmt(2.0 * mr.sd) << "); LDSC-vs-theory ensemble deviation h2 " << fmt(dev_h2)
     << " (lim " << fmt(lim_h2) << "), rho_g " << fmt(dev_rg) << " (lim " << fmt(lim_rg)
     << "), phi_g " << fmt(dev_phi) << " (lim " << fmt(lim_phi) << "); " << failed
     << " failed reps; " << fmt(sum.elapsed) << " s (limit 1800)";
  c5.detail = d5.str();

  const double mean_adj_se = mean_sd(h2_adj_se).mean;
  const double ratio = mean_adj_se / ma.sd;
  c6.pass = failed == 0 && ratio >= 1.0 / 1.5 && ratio <= 1.5;
  std::ostringstream d6;
  d6 << "jackknife SE of adjusted h2 " << fmt(mean_adj_se) << " vs replicate SD "
     << fmt(ma.sd) << ", ratio " << fmt(ratio) << " (must lie in [1/1.5, 1.5]);"
     << " logged: SE(adjusted) < SE(unadjusted) in this scenario: "
     << (mean_adj_se < mean_sd(h2_se).mean ? "yes" : "no");
  c6.detail = d6.str();
}

// ---------------------------------------------------------------------------
// 7. Mean-shift inversion against the quadrature oracle plus a conditional
//    end-to-end pass over published-style inputs.

Criterion criterion_table_row() {
  Criterion c;
  const double alpha = 0.055;
  const double delta = -0.138;
  // Quadrature-only oracle: bisection on the forward mean-shift map built from
  // integrated truncation moments.
  const double t = oracle::threshold_for_alpha(alpha);
  const auto tm = oracle::truncated_moments(t);
  const double xi_q = 1.0 - tm.variance;
  const double rho_oracle = oracle::bisect_quantile(
      [&](double rho) { return rho * tm.mean / std::sqrt(1.0 - xi_q * rho * rho); },
      delta, -0.999, 0.999, 1e-14);
  const double rho_hat = rho_from_delta(delta, alpha);
  const double err = std::abs(rho_hat - rho_oracle);

  // Chain exercised end to end with a user-supplied participation heritability
  // (0.125 here is an arbitrary fixture, not an assertion about any published
  // value) and unadjusted inputs at the published scale. Reproduction of the
  // adjusted columns is conditional on the external h2x and not asserted.
  const SelectionContext sel = make_selection_context(alpha);
  const double h2x_fixture = 0.125;
  const AdjustedPhenotype adj =
      adjust_phenotype(PhenotypeEstimates{0.251, -0.219, delta}, h2x_fixture, sel);
  const bool finite = std::isfinite(adj.h2_y_tilde) && std::isfinite(adj.rho_g_tilde) &&
                      std::isfinite(adj.rho_e_tilde);
  c.pass = err <= 1e-10 && finite;
  std::ostringstream d;
  d << "rho(delta=-0.138, alpha=0.055) = " << rho_hat << ", |vs quadrature oracle| = "
    << fmt(err) << " (tol 1e-10); chain with fixture h2x=" << h2x_fixture
    << " gives h2~=" << fmt(adj.h2_y_tilde) << ", rho_g~=" << fmt(adj.rho_g_tilde)
    << ", rho_e~=" << fmt(adj.rho_e_tilde)
    << " (adjusted-column reproduction is conditional on the external h2x; not asserted)";
  c.detail = d.str();
  return c;
}

// ---------------------------------------------------------------------------
// 8. Determinism through the CLI.

int run_cli(const std::string& args) {
  const std::string cmd = std::string(PB_CLI_BIN) + " " + args + " > /dev/null 2>&1";
  return WEXITSTATUS(std::system(cmd.c_str()));
}

Criterion criterion_determinism() {
  Criterion c;
  const fs::path dir = fs::temp_directory_path() / "pb_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string cfg = (dir / "sim.cfg").string();
  write_text_file(cfg,
                  "[simulation]\n"
                  "n = 10000\nm = 1000\nalpha = 0.1\nh2x = 0.125\n"
                  "h2y1 = 0.5\nrho_g1 = -0.3\nrho_e1 = 0.6\n"
                  "ld_block_size = 10\nld_block_rho = 0.8\n");
  const std::string s1 = (dir / "s1").string();
  const std::string s2 = (dir / "s2").string();
  bool ok = run_cli("simulate --config " + cfg + " --seed 99 --out-dir " + s1) == 0 &&
            run_cli("simulate --config " + cfg + " --seed 99 --out-dir " + s2) == 0;
  for (const char* f : {"participation.sumstats", "y1.sumstats", "ld_scores.txt",
                        "truth.csv", "mean_shifts.csv"}) {
    ok = ok && read_text_file(s1 + "/" + f) == read_text_file(s2 + "/" + f);
  }
  const std::string adj_cfg = (dir / "adj.cfg").string();
  write_text_file(adj_cfg,
                  "[participation]\nalpha = 0.1\nh2x = 0.125\n\n"
                  "[inputs]\n"
                  "participation_sumstats = " + s1 + "/participation.sumstats\n" +
                  "ld_scores = " + s1 + "/ld_scores.txt\n" +
                  "mean_shifts = " + s1 + "/mean_shifts.csv\n\n" +
                  "[ldsc]\nblocks = 100\n\n" +
                  "[phenotype y1]\nsumstats = " + s1 + "/y1.sumstats\n");
  const std::string a1 = (dir / "a1").string();
  const std::string a2 = (dir / "a2").string();
  ok = ok && run_cli("adjust --config " + adj_cfg + " --out-dir " + a1) == 0 &&
       run_cli("adjust --config " + adj_cfg + " --out-dir " + a2) == 0;
  ok = ok && read_text_file(a1 + "/results.csv") == read_text_file(a2 + "/results.csv") &&
       read_text_file(a1 + "/results.jsonl") == read_text_file(a2 + "/results.jsonl");
  fs::remove_all(dir);
  c.pass = ok;
  c.detail = "repeated simulate + adjust runs with a fixed seed produce byte-identical "
             "result files";
  return c;
}

void report(int index, const std::string& name, const Criterion& c, int& failures) {
  if (!c.pass) ++failures;
  std::printf("%s criterion %d (%s): %s\n", c.pass ? "PASS" : "FAIL", index, name.c_str(),
              c.detail.c_str());
  std::fflush(stdout);
}

}  // namespace

int main() {
  int failures = 0;
  report(1, "round-trip exactness", criterion_round_trip(), failures);
  report(2, "truncation identity", criterion_truncation_identity(), failures);
  report(3, "MC oracle agreement", criterion_mc_agreement(), failures);
  report(4, "direction of bias", criterion_bias_direction(), failures);

  const EndToEndScenario sc;
  const EndToEndSummary sum = run_end_to_end(sc);
  Criterion c5, c6;
  criterion_end_to_end(sc, sum, c5, c6);
  report(5, "end-to-end simulation", c5, failures);
  report(6, "jackknife calibration", c6, failures);

  report(7, "published-row inversion", criterion_table_row(), failures);
  report(8, "determinism", criterion_determinism(), failures);

  if (failures == 0) {
    std::printf("acceptance: all 8 criteria passed\n");
  } else {
    std::printf("acceptance: %d criteria FAILED\n", failures);
  }
  return failures == 0 ? 0 : 1;
}
