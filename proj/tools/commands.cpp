#include "commands.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <thread>
#include <vector>

#include <json.hpp>

#include "pb/adjust.hpp"
#include "pb/errors.hpp"
#include "pb/io.hpp"
#include "pb/jackknife.hpp"
#include "pb/ldsc.hpp"
#include "pb/model.hpp"
#include "pb/simgen.hpp"
#include "pb/truncnorm.hpp"
#include "pb/version.hpp"

namespace pbcli {

namespace {

using pb::Config;
using pb::InputError;
using pb::NumericError;

// Deterministic index-sharded parallelism: slot i is written only by the
// worker that owns index i, so results are byte-identical to sequential runs.
void parallel_for(int threads, Eigen::Index n, const std::function<void(Eigen::Index)>& fn) {
  threads = std::max(1, threads);
  if (threads == 1 || n <= 1) {
    for (Eigen::Index i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t]() {
      try {
        for (Eigen::Index i = t; i < n; i += threads) fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

void write_manifest(const CommonOptions& opts, const std::string& command,
                    const std::vector<std::string>& input_paths) {
  nlohmann::json j;
  j["command"] = command;
  j["config"] = opts.config_path;
  j["seed"] = opts.seed;
  j["blocks"] = opts.blocks;
  j["threads"] = opts.threads;
  j["tool"] = "pbadjust";
  j["version"] = pb::kVersion;
  j["timestamp_utc"] = utc_timestamp();
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto& p : input_paths) {
    nlohmann::json entry;
    entry["path"] = p;
    entry["bytes"] = std::filesystem::file_size(p);
    entry["fnv64"] = pb::file_digest_hex(p);
    inputs.push_back(entry);
  }
  j["inputs"] = inputs;
  pb::write_text_file((std::filesystem::path(opts.out_dir) / "manifest.json").string(),
                      j.dump(2) + "\n");
}

std::string out_path(const CommonOptions& opts, const std::string& name) {
  return (std::filesystem::path(opts.out_dir) / name).string();
}

void ensure_out_dir(const CommonOptions& opts) {
  if (opts.out_dir.empty()) throw InputError("--out-dir is required");
  std::filesystem::create_directories(opts.out_dir);
}

double two_sided_p(double estimate, double se) {
  if (!(se > 0.0) || !std::isfinite(estimate)) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  return 2.0 * pb::std_normal_cdf(-std::abs(estimate / se));
}

std::string join_warnings(const std::vector<std::string>& w) {
  std::string out;
  for (const auto& s : w) {
    if (!out.empty()) out += "; ";
    out += s;
  }
  return out;
}

// ---------------------------------------------------------------------------
// forward-curves

int forward_curves_impl(const CommonOptions& opts) {
  ensure_out_dir(opts);
  const Config cfg = pb::read_config(opts.config_path);
  const double h2x = cfg.get_double_or("curves", "h2x", 0.125);
  const double h2y = cfg.get_double_or("curves", "h2y", 0.5);
  const double varphi_g = cfg.get_double_or("curves", "varphi_g", 0.4);
  const double varphi_e = cfg.get_double_or("curves", "varphi_e", 0.2);
  const pb::ParticipationParams part = pb::make_participation_params(h2x);

  std::vector<double> alphas;
  if (cfg.has("curves", "alphas")) {
    alphas = cfg.get_double_list("curves", "alphas");
  } else {
    const double lo = cfg.get_double_or("curves", "alpha_min", 0.02);
    const double hi = cfg.get_double_or("curves", "alpha_max", 1.0);
    const auto steps = cfg.get_int_or("curves", "alpha_steps", 50);
    if (steps < 2 || !(lo > 0.0) || !(hi <= 1.0) || !(lo < hi)) {
      throw InputError("curves: invalid alpha grid");
    }
    for (std::int64_t i = 0; i < steps; ++i) {
      alphas.push_back(lo + (hi - lo) * static_cast<double>(i) /
                                static_cast<double>(steps - 1));
    }
  }
  std::vector<double> rho_gs = {-0.5, -0.25, 0.0, 0.25, 0.5};
  std::vector<double> rho_es = rho_gs;
  if (cfg.has("curves", "rho_g")) rho_gs = cfg.get_double_list("curves", "rho_g");
  if (cfg.has("curves", "rho_e")) rho_es = cfg.get_double_list("curves", "rho_e");

  std::ostringstream out;
  out << "quantity,alpha,h2x,h2y,rho_g,rho_e,varphi_g,varphi_e,population,apparent,warning\n";
  auto emit = [&](const std::string& quantity, double alpha, double rg, double re,
                  bool pair_row, double population, double apparent,
                  const std::string& warning) {
    out << quantity << ',' << pb::format_double(alpha) << ',' << pb::format_double(h2x)
        << ',' << pb::format_double(h2y) << ',' << pb::format_double(rg) << ','
        << pb::format_double(re) << ',';
    if (pair_row) {
      out << pb::format_double(varphi_g) << ',' << pb::format_double(varphi_e);
    } else {
      out << ',';
    }
    out << ',' << pb::format_double(population) << ',' << pb::format_double(apparent)
        << ',' << warning << '\n';
  };

  for (const double rg : rho_gs) {
    for (const double re : rho_es) {
      const pb::PhenotypeParams y = pb::make_phenotype_params(h2y, rg, re);
      const pb::PairParams pair{y, y, varphi_g, varphi_e};
      const bool pair_ok = pb::pair_params_valid(pair);
      for (const double alpha : alphas) {
        const pb::SelectionContext sel = pb::make_selection_context(alpha);
        emit("h2_pb", alpha, rg, re, false, h2y, pb::apparent_h2(part, y, sel), "");
        emit("rho_g_pb", alpha, rg, re, false, rg,
             pb::apparent_participation_gcor(part, y, sel), "");
        emit("delta", alpha, rg, re, false, 0.0, pb::mean_shift(part, y, sel), "");
        if (pair_ok) {
          emit("phi_g_pb", alpha, rg, re, true, varphi_g,
               pb::apparent_pair_gcor(part, pair, sel), "");
        } else {
          emit("phi_g_pb", alpha, rg, re, true,
               std::numeric_limits<double>::quiet_NaN(),
               std::numeric_limits<double>::quiet_NaN(), "non-PSD parameters skipped");
        }
      }
    }
  }
  pb::write_text_file(out_path(opts, "forward_curves.csv"), out.str());
  write_manifest(opts, "forward-curves", {opts.config_path});
  return 0;
}

// ---------------------------------------------------------------------------
// simulate

int simulate_impl(const CommonOptions& opts) {
  ensure_out_dir(opts);
  const Config cfg = pb::read_config(opts.config_path);
  const std::string s = "simulation";
  pb::SnpCohortConfig sc;
  sc.n = cfg.get_int_or(s, "n", 10000);
  sc.m = cfg.get_int_or(s, "m", 2000);
  sc.maf_low = cfg.get_double_or(s, "maf_low", 0.05);
  sc.maf_high = cfg.get_double_or(s, "maf_high", 0.95);
  sc.ld_block_size = cfg.get_int_or(s, "ld_block_size", 10);
  sc.ld_block_rho = cfg.get_double_or(s, "ld_block_rho", 0.8);
  if (const char* env = std::getenv("PBADJUST_MAX_BYTES")) {
    sc.memory_budget_bytes = static_cast<std::uint64_t>(
        pb::parse_double(env, "PBADJUST_MAX_BYTES"));
  }
  const double alpha = cfg.get_double(s, "alpha");
  const pb::SelectionContext sel = pb::make_selection_context(alpha);
  const pb::ParticipationParams part =
      pb::make_participation_params(cfg.get_double(s, "h2x"));
  const pb::PhenotypeParams y1 = pb::make_phenotype_params(
      cfg.get_double(s, "h2y1"), cfg.get_double_or(s, "rho_g1", 0.0),
      cfg.get_double_or(s, "rho_e1", 0.0));

  pb::SnpCohort cohort;
  const bool has_pair = cfg.has(s, "h2y2");
  if (has_pair) {
    const pb::PhenotypeParams y2 = pb::make_phenotype_params(
        cfg.get_double(s, "h2y2"), cfg.get_double_or(s, "rho_g2", 0.0),
        cfg.get_double_or(s, "rho_e2", 0.0));
    const pb::PairParams pair = pb::make_pair_params(
        y1, y2, cfg.get_double_or(s, "varphi_g", 0.0), cfg.get_double_or(s, "varphi_e", 0.0));
    cohort = pb::simulate_snp_cohort(part, pair, sel, sc, opts.seed);
  } else {
    cohort = pb::simulate_snp_cohort(part, y1, sel, sc, opts.seed);
  }

  // Participation statistics come from the full cohort (the stand-in for the
  // externally supplied population-scale participation GWAS); phenotype
  // statistics come from participants only.
  const pb::GwasResult gx = pb::gwas_on_all(cohort, pb::Trait::X);
  pb::write_sumstats(gx.stats, out_path(opts, "participation.sumstats"));
  const pb::GwasResult g1 = pb::gwas_on_selected(cohort, pb::Trait::Y1);
  pb::write_sumstats(g1.stats, out_path(opts, "y1.sumstats"));
  if (has_pair) {
    const pb::GwasResult g2 = pb::gwas_on_selected(cohort, pb::Trait::Y2);
    pb::write_sumstats(g2.stats, out_path(opts, "y2.sumstats"));
  }
  pb::write_ld_scores(pb::snp_ld_scores(cohort), out_path(opts, "ld_scores.txt"));

  // Empirical mean shifts of the phenotypes, participants against everyone.
  {
    std::vector<pb::MeanShiftRecord> shifts;
    auto shift_of = [&](const Eigen::VectorXd& y, const std::string& name) {
      std::vector<double> sel_v;
      sel_v.reserve(static_cast<std::size_t>(cohort.selected.count()));
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (cohort.selected(i)) sel_v.push_back(y(i));
      }
      Eigen::Map<const Eigen::VectorXd> sample(sel_v.data(),
                                               static_cast<Eigen::Index>(sel_v.size()));
      return pb::compute_mean_shift(name, sample, y, alpha);
    };
    shifts.push_back(shift_of(cohort.y1, "y1"));
    if (has_pair) shifts.push_back(shift_of(cohort.y2, "y2"));
    pb::write_mean_shifts(shifts, out_path(opts, "mean_shifts.csv"));
  }

  // Population parameters and the theory values they imply, for downstream
  // comparison against whatever an analysis of the sample produces.
  {
    std::ostringstream truth;
    truth << "parameter,value\n";
    auto row = [&](const std::string& k, double v) {
      truth << k << ',' << pb::format_double(v) << '\n';
    };
    row("alpha", alpha);
    row("seed", static_cast<double>(opts.seed));
    row("n", static_cast<double>(sc.n));
    row("m", static_cast<double>(sc.m));
    row("n_selected", static_cast<double>(cohort.selected.count()));
    row("h2x", part.h2_x);
    row("h2y1", y1.h2_y);
    row("rho_g1", y1.rho_g);
    row("rho_e1", y1.rho_e);
    row("theory_h2_pb1", pb::apparent_h2(part, y1, sel));
    row("theory_rho_g_pb1", pb::apparent_participation_gcor(part, y1, sel));
    row("theory_delta1", pb::mean_shift(part, y1, sel));
    if (has_pair) {
      const pb::PhenotypeParams y2{cfg.get_double(s, "h2y2"),
                                   cfg.get_double_or(s, "rho_g2", 0.0),
                                   cfg.get_double_or(s, "rho_e2", 0.0)};
      const pb::PairParams pair{y1, y2, cfg.get_double_or(s, "varphi_g", 0.0),
                                cfg.get_double_or(s, "varphi_e", 0.0)};
      row("h2y2", y2.h2_y);
      row("rho_g2", y2.rho_g);
      row("rho_e2", y2.rho_e);
      row("varphi_g", pair.varphi_g);
      row("varphi_e", pair.varphi_e);
      row("theory_h2_pb2", pb::apparent_h2(part, y2, sel));
      row("theory_rho_g_pb2", pb::apparent_participation_gcor(part, y2, sel));
      row("theory_delta2", pb::mean_shift(part, y2, sel));
      row("theory_phi_g_pb", pb::apparent_pair_gcor(part, pair, sel));
    }
    pb::write_text_file(out_path(opts, "truth.csv"), truth.str());
  }

  // Cohort summary.
  {
    std::ostringstream sum;
    sum << "statistic,value\n";
    auto row = [&](const std::string& k, double v) {
      sum << k << ',' << pb::format_double(v) << '\n';
    };
    row("selected_fraction", static_cast<double>(cohort.selected.count()) /
                                 static_cast<double>(sc.n));
    row("mean_freq", cohort.freqs.mean());
    row("var_x_all", (cohort.x.array() - cohort.x.mean()).square().sum() /
                         static_cast<double>(sc.n - 1));
    row("var_y1_all", (cohort.y1.array() - cohort.y1.mean()).square().sum() /
                          static_cast<double>(sc.n - 1));
    row("monomorphic_y1_gwas", static_cast<double>(g1.monomorphic.size()));
    pb::write_text_file(out_path(opts, "cohort_summary.csv"), sum.str());
  }

  write_manifest(opts, "simulate", {opts.config_path});
  return 0;
}

// ---------------------------------------------------------------------------
// adjust

struct PhenoSpec {
  std::string name;
  std::string sumstats_path;
  double delta_hat = 0.0;
  double delta_se = 0.0;        // 0 = treated as fixed
  double liability_factor = 1;  // observed -> liability h2 scaling for binary traits
  bool binary = false;
};

// Additive per-block statistics for one phenotype chain: its chi^2 regression
// and its product regression against the participation statistics.
struct PhenoBlocks {
  pb::WlsStat h2;
  pb::WlsStat gx;
  PhenoBlocks& operator+=(const PhenoBlocks& o) {
    h2 += o.h2;
    gx += o.gx;
    return *this;
  }
  PhenoBlocks& operator-=(const PhenoBlocks& o) {
    h2 -= o.h2;
    gx -= o.gx;
    return *this;
  }
};

// Same for a phenotype pair (everything the pairwise adjustment consumes).
struct PairBlocks {
  pb::WlsStat h2a, h2b, gxa, gxb, gab;
  PairBlocks& operator+=(const PairBlocks& o) {
    h2a += o.h2a; h2b += o.h2b; gxa += o.gxa; gxb += o.gxb; gab += o.gab;
    return *this;
  }
  PairBlocks& operator-=(const PairBlocks& o) {
    h2a -= o.h2a; h2b -= o.h2b; gxa -= o.gxa; gxb -= o.gxb; gab -= o.gab;
    return *this;
  }
};

double slope_of(const pb::WlsStat& s, const pb::LdscOptions& opts, double fixed_value) {
  return opts.fix_intercept ? pb::solve_wls_slope(s, fixed_value)
                            : pb::solve_wls(s).slope;
}

// Unadjusted-then-adjusted estimates for one phenotype from pooled regression
// statistics. Output layout: [h2_orig, rho_g_orig, h2_adj, rho_g_adj, rho_e_adj].
Eigen::VectorXd pheno_chain(const PhenoBlocks& stat, const PhenoSpec& spec, double h2x,
                            const pb::SelectionContext& sel, const pb::LdscOptions& ldsc) {
  const double h2_obs = slope_of(stat.h2, ldsc, 1.0);
  const double gcov_raw = slope_of(stat.gx, ldsc, 0.0);
  const double dx = 1.0 - sel.xi * h2x;
  if (!(dx > 0.0)) throw NumericError("degenerate selection: 1 - xi*h2x <= 0");
  // Apparent genetic correlation with participation; scale-free, so the
  // observed-scale h2 is the consistent denominator for an observed-scale
  // genetic covariance.
  const double rho_g_hat =
      h2_obs > 0.0 ? gcov_raw / std::sqrt(dx * h2x * h2_obs)
                   : std::numeric_limits<double>::quiet_NaN();
  const double h2_liab = spec.liability_factor * h2_obs;
  pb::PhenotypeEstimates est{h2_liab, rho_g_hat, spec.delta_hat};
  if (!std::isfinite(rho_g_hat)) {
    est.rho_g_hat = 0.0;  // chain still runs; the NaN is reported in rho_g_orig
  }
  const pb::AdjustedPhenotype adj = pb::adjust_phenotype(est, h2x, sel);
  Eigen::VectorXd v(5);
  v << h2_liab, rho_g_hat, adj.h2_y_tilde, adj.rho_g_tilde, adj.rho_e_tilde;
  return v;
}

// Output layout: [phi_orig, phi_adj].
Eigen::VectorXd pair_chain(const PairBlocks& stat, const PhenoSpec& a, const PhenoSpec& b,
                           double h2x, const pb::SelectionContext& sel,
                           const pb::LdscOptions& ldsc) {
  const double h2a_obs = slope_of(stat.h2a, ldsc, 1.0);
  const double h2b_obs = slope_of(stat.h2b, ldsc, 1.0);
  const double gab = slope_of(stat.gab, ldsc, 0.0);
  if (!(h2a_obs > 0.0 && h2b_obs > 0.0)) {
    throw NumericError("pairwise correlation undefined: non-positive h2");
  }
  const double varphi_g_hat = gab / std::sqrt(h2a_obs * h2b_obs);
  const double dx = 1.0 - sel.xi * h2x;
  if (!(dx > 0.0)) throw NumericError("degenerate selection: 1 - xi*h2x <= 0");
  auto rho_g_of = [&](double gcov_raw, double h2_obs) {
    return gcov_raw / std::sqrt(dx * h2x * h2_obs);
  };
  pb::SampleEstimates est;
  est.alpha = sel.alpha;
  est.h2_x_hat = h2x;
  est.y1 = pb::PhenotypeEstimates{a.liability_factor * h2a_obs,
                                  rho_g_of(slope_of(stat.gxa, ldsc, 0.0), h2a_obs),
                                  a.delta_hat};
  est.y2 = pb::PhenotypeEstimates{b.liability_factor * h2b_obs,
                                  rho_g_of(slope_of(stat.gxb, ldsc, 0.0), h2b_obs),
                                  b.delta_hat};
  est.varphi_g_hat = varphi_g_hat;
  const pb::AdjustedPair adj = pb::adjust_pair(est, sel);
  Eigen::VectorXd v(2);
  v << varphi_g_hat, adj.varphi_g_tilde;
  return v;
}

// Delta-method variance add-on for external uncertainty in h2x and delta,
// central finite differences of the estimator.
Eigen::VectorXd delta_method_var(const std::function<Eigen::VectorXd(double, double)>& est,
                                 double h2x, double h2x_se, double delta, double delta_se) {
  Eigen::VectorXd var;
  if (h2x_se > 0.0) {
    const double h = std::max(1e-5, 1e-3 * h2x);
    const Eigen::VectorXd lo = est(h2x - h, delta);
    const Eigen::VectorXd hi = est(h2x + h, delta);
    const Eigen::VectorXd grad = (hi - lo) / (2.0 * h);
    if (var.size() == 0) var = Eigen::VectorXd::Zero(grad.size());
    var += (h2x_se * h2x_se) * grad.array().square().matrix();
  }
  if (delta_se > 0.0) {
    const double h = std::max(1e-6, 1e-3 * std::abs(delta) + 1e-6);
    const Eigen::VectorXd lo = est(h2x, delta - h);
    const Eigen::VectorXd hi = est(h2x, delta + h);
    const Eigen::VectorXd grad = (hi - lo) / (2.0 * h);
    if (var.size() == 0) var = Eigen::VectorXd::Zero(grad.size());
    var += (delta_se * delta_se) * grad.array().square().matrix();
  }
  return var;
}

int adjust_impl(const CommonOptions& opts) {
  ensure_out_dir(opts);
  const Config cfg = pb::read_config(opts.config_path);

  const double alpha = cfg.get_double("participation", "alpha");
  if (!cfg.has("participation", "h2x")) {
    throw InputError("config: participation h2x is required (external estimate; no default)");
  }
  const double h2x = cfg.get_double("participation", "h2x");
  const double h2x_se = cfg.get_double_or("participation", "h2x_se", 0.0);
  const pb::SelectionContext sel = pb::make_selection_context(alpha);

  pb::LdscOptions ldsc;
  ldsc.n_blocks = opts.blocks > 0
                      ? opts.blocks
                      : static_cast<int>(cfg.get_int_or("ldsc", "blocks", 200));
  ldsc.fix_intercept = cfg.get_bool_or("ldsc", "fix_intercept", false);

  const std::string part_path = cfg.get_string("inputs", "participation_sumstats");
  const std::string shifts_path = cfg.get_string("inputs", "mean_shifts");
  std::vector<std::string> input_paths = {opts.config_path, part_path, shifts_path};

  std::vector<std::string> warnings;
  const pb::SumStats part_stats = pb::read_sumstats(part_path, &warnings);

  const auto shift_records = pb::read_mean_shifts(shifts_path);
  auto shift_for = [&](const std::string& name) -> const pb::MeanShiftRecord& {
    for (const auto& r : shift_records) {
      if (r.phenotype == name) return r;
    }
    throw InputError("mean-shift table has no row for phenotype '" + name + "'");
  };

  const auto pheno_names = cfg.subsections("phenotype");
  if (pheno_names.empty()) throw InputError("config: no [phenotype <name>] sections");
  std::vector<PhenoSpec> specs;
  std::vector<pb::SumStats> all_stats = {part_stats};
  for (const auto& name : pheno_names) {
    PhenoSpec spec;
    spec.name = name;
    spec.sumstats_path = cfg.get_string("phenotype " + name, "sumstats");
    spec.delta_hat = shift_for(name).delta_hat;
    spec.delta_se = cfg.get_double_or("phenotype " + name, "delta_se", 0.0);
    spec.binary = cfg.get_bool_or("phenotype " + name, "binary", false);
    if (spec.binary) {
      const double p = cfg.get_double("phenotype " + name, "sample_prevalence");
      const double k = cfg.get_double("phenotype " + name, "population_prevalence");
      spec.liability_factor = pb::observed_to_liability_h2(1.0, p, k);
    }
    input_paths.push_back(spec.sumstats_path);
    pb::SumStats stats = pb::read_sumstats(spec.sumstats_path, &warnings);
    stats.trait = name;
    all_stats.push_back(std::move(stats));
    specs.push_back(std::move(spec));
  }

  pb::LdScores ld;
  if (cfg.has("inputs", "ld_scores")) {
    const std::string ld_path = cfg.get_string("inputs", "ld_scores");
    input_paths.push_back(ld_path);
    ld = pb::read_ld_scores(ld_path, &warnings);
  } else {
    // Unit scores over the participation file's SNPs; a free-intercept fit
    // then has no leverage, so configs without LD scores should also fix the
    // intercept.
    ld.snp = part_stats.snp;
    ld.l2 = Eigen::VectorXd::Ones(part_stats.size());
  }
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";

  // One panel over every file: all regressions share SNPs and blocks, so the
  // jackknife composes across the whole chain.
  const pb::Panel panel = pb::build_panel(all_stats, ld);
  const std::int64_t m = cfg.get_int_or("inputs", "m", panel.n_snps());

  const auto n_ph = static_cast<Eigen::Index>(specs.size());

  struct PhenoOutput {
    pb::JackknifeResult jk;
    std::vector<std::string> chain_warnings;
  };
  std::vector<PhenoOutput> pheno_out(static_cast<std::size_t>(n_ph));

  parallel_for(opts.threads, n_ph, [&](Eigen::Index i) {
    const auto iu = static_cast<std::size_t>(i);
    const Eigen::Index trait = i + 1;  // panel slot 0 is participation
    const auto h2_blocks = pb::h2_regression_blocks(panel, trait, m, ldsc);
    const auto gx_blocks = pb::gcov_regression_blocks(panel, 0, trait, m, ldsc);
    std::vector<PhenoBlocks> blocks(h2_blocks.size());
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      blocks[b] = PhenoBlocks{h2_blocks[b], gx_blocks[b]};
    }
    pheno_out[iu].jk = pb::block_jackknife(blocks, [&](const PhenoBlocks& stat) {
      return pheno_chain(stat, specs[iu], h2x, sel, ldsc);
    });
    // Chain warnings from the full-data pass.
    PhenoBlocks pooled;
    for (const auto& b : blocks) pooled += b;
    const double h2_obs = slope_of(pooled.h2, ldsc, 1.0);
    const double gcov_raw = slope_of(pooled.gx, ldsc, 0.0);
    const double dx = 1.0 - sel.xi * h2x;
    const double rho_g_hat =
        h2_obs > 0.0 ? gcov_raw / std::sqrt(dx * h2x * h2_obs) : 0.0;
    pb::PhenotypeEstimates est{specs[iu].liability_factor * h2_obs, rho_g_hat,
                               specs[iu].delta_hat};
    pheno_out[iu].chain_warnings = pb::adjust_phenotype(est, h2x, sel).warnings;
    if (h2_obs <= 0.0) {
      pheno_out[iu].chain_warnings.push_back("unadjusted h2 is not positive");
    }

    // External-uncertainty add-on.
    if (h2x_se > 0.0 || specs[iu].delta_se > 0.0) {
      const Eigen::VectorXd var_add = delta_method_var(
          [&](double h2x_v, double delta_v) {
            PhenoSpec s2 = specs[iu];
            s2.delta_hat = delta_v;
            return pheno_chain(pooled, s2, h2x_v, sel, ldsc);
          },
          h2x, h2x_se, specs[iu].delta_hat, specs[iu].delta_se);
      if (var_add.size() == pheno_out[iu].jk.se.size()) {
        pheno_out[iu].jk.se =
            (pheno_out[iu].jk.se.array().square() + var_add.array()).sqrt().matrix();
      }
    }
  });

  // Pairwise adjustments.
  struct PairOutput {
    std::string a, b;
    pb::JackknifeResult jk;
    std::vector<std::string> chain_warnings;
  };
  std::vector<std::pair<Eigen::Index, Eigen::Index>> pair_idx;
  for (Eigen::Index i = 0; i < n_ph; ++i) {
    for (Eigen::Index j = i + 1; j < n_ph; ++j) pair_idx.emplace_back(i, j);
  }
  std::vector<PairOutput> pair_out(pair_idx.size());
  parallel_for(opts.threads, static_cast<Eigen::Index>(pair_idx.size()),
               [&](Eigen::Index k) {
                 const auto [i, j] = pair_idx[static_cast<std::size_t>(k)];
                 const auto iu = static_cast<std::size_t>(i);
                 const auto ju = static_cast<std::size_t>(j);
                 const auto h2a = pb::h2_regression_blocks(panel, i + 1, m, ldsc);
                 const auto h2b = pb::h2_regression_blocks(panel, j + 1, m, ldsc);
                 const auto gxa = pb::gcov_regression_blocks(panel, 0, i + 1, m, ldsc);
                 const auto gxb = pb::gcov_regression_blocks(panel, 0, j + 1, m, ldsc);
                 const auto gab = pb::gcov_regression_blocks(panel, i + 1, j + 1, m, ldsc);
                 std::vector<PairBlocks> blocks(h2a.size());
                 for (std::size_t b = 0; b < blocks.size(); ++b) {
                   blocks[b] = PairBlocks{h2a[b], h2b[b], gxa[b], gxb[b], gab[b]};
                 }
                 auto& out = pair_out[static_cast<std::size_t>(k)];
                 out.a = specs[iu].name;
                 out.b = specs[ju].name;
                 out.jk = pb::block_jackknife(blocks, [&](const PairBlocks& stat) {
                   return pair_chain(stat, specs[iu], specs[ju], h2x, sel, ldsc);
                 });
                 PairBlocks pooled;
                 for (const auto& b : blocks) pooled += b;
                 // Re-run the full-data chain for warnings.
                 try {
                   pair_chain(pooled, specs[iu], specs[ju], h2x, sel, ldsc);
                 } catch (const std::exception& e) {
                   out.chain_warnings.push_back(e.what());
                 }
               });

  // Assemble result rows.
  std::vector<pb::ResultRow> rows;
  int sign_flips = 0;
  for (Eigen::Index i = 0; i < n_ph; ++i) {
    const auto iu = static_cast<std::size_t>(i);
    const auto& jk = pheno_out[iu].jk;
    const std::string warn = join_warnings(pheno_out[iu].chain_warnings);
    pb::ResultRow h2_row{specs[iu].name, "h2", jk.estimate(0), jk.estimate(2), jk.se(0),
                         jk.se(2), warn, {}};
    h2_row.extra["p_original"] = two_sided_p(jk.estimate(0), jk.se(0));
    h2_row.extra["p_adjusted"] = two_sided_p(jk.estimate(2), jk.se(2));
    rows.push_back(std::move(h2_row));
    pb::ResultRow rg_row{specs[iu].name, "rho_g", jk.estimate(1), jk.estimate(3), jk.se(1),
                         jk.se(3), warn, {}};
    rg_row.extra["p_original"] = two_sided_p(jk.estimate(1), jk.se(1));
    rg_row.extra["p_adjusted"] = two_sided_p(jk.estimate(3), jk.se(3));
    rows.push_back(std::move(rg_row));
    pb::ResultRow re_row{specs[iu].name, "rho_e", std::numeric_limits<double>::quiet_NaN(),
                         jk.estimate(4), std::numeric_limits<double>::quiet_NaN(), jk.se(4),
                         warn, {}};
    re_row.extra["p_adjusted"] = two_sided_p(jk.estimate(4), jk.se(4));
    rows.push_back(std::move(re_row));
    // Sign preservation is logged, not asserted.
    if (std::abs(jk.estimate(1)) > jk.se(1) &&
        jk.estimate(1) * jk.estimate(3) < 0.0) {
      ++sign_flips;
      std::cerr << "note: rho_g sign flipped after adjustment for " << specs[iu].name
                << "\n";
    }
  }
  std::cerr << "note: rho_g sign flips among phenotypes with |estimate| > SE: "
            << sign_flips << "\n";

  std::vector<pb::ResultRow> pair_rows;
  const double bonferroni =
      pair_idx.empty() ? 0.05 : 0.05 / static_cast<double>(pair_idx.size());
  for (const auto& po : pair_out) {
    pb::ResultRow row{po.a + ":" + po.b, "phi_g", po.jk.estimate(0), po.jk.estimate(1),
                      po.jk.se(0), po.jk.se(1), join_warnings(po.chain_warnings), {}};
    row.extra["p_original"] = two_sided_p(po.jk.estimate(0), po.jk.se(0));
    row.extra["p_adjusted"] = two_sided_p(po.jk.estimate(1), po.jk.se(1));
    row.extra["bonferroni_alpha"] = bonferroni;
    row.extra["significant_bonferroni"] =
        (two_sided_p(po.jk.estimate(1), po.jk.se(1)) < bonferroni) ? 1.0 : 0.0;
    pair_rows.push_back(std::move(row));
  }

  pb::write_results_csv(rows, out_path(opts, "results.csv"));
  pb::write_results_jsonl(rows, out_path(opts, "results.jsonl"));
  if (!pair_rows.empty()) {
    pb::write_results_csv(pair_rows, out_path(opts, "pairs.csv"));
    pb::write_results_jsonl(pair_rows, out_path(opts, "pairs.jsonl"));
  }
  write_manifest(opts, "adjust", input_paths);
  return 0;
}

// ---------------------------------------------------------------------------
// meanshift

int meanshift_impl(const CommonOptions& opts, const std::string& sample_path,
                   const std::string& reference_path) {
  ensure_out_dir(opts);
  const Config cfg = pb::read_config(opts.config_path);
  const double alpha = cfg.get_double("meanshift", "alpha");

  const pb::PhenotypeTable sample = pb::read_phenotype_table(sample_path);
  const pb::PhenotypeTable reference = pb::read_phenotype_table(reference_path);

  std::vector<std::string> phenos;
  {
    std::istringstream iss(cfg.get_string("meanshift", "phenotypes"));
    std::string tok;
    while (std::getline(iss, tok, ',')) {
      const auto b = tok.find_first_not_of(" \t");
      const auto e = tok.find_last_not_of(" \t");
      if (b != std::string::npos) phenos.push_back(tok.substr(b, e - b + 1));
    }
  }
  if (phenos.empty()) throw InputError("meanshift: no phenotypes configured");

  std::vector<std::string> covariates;
  if (cfg.has("meanshift", "covariates")) {
    std::istringstream iss(cfg.get_string("meanshift", "covariates"));
    std::string tok;
    while (std::getline(iss, tok, ',')) {
      const auto b = tok.find_first_not_of(" \t");
      const auto e = tok.find_last_not_of(" \t");
      if (b != std::string::npos) covariates.push_back(tok.substr(b, e - b + 1));
    }
  }
  const std::string strata_col = cfg.get_string_or("meanshift", "strata", "");
  std::set<std::string> int_skip;
  if (cfg.has("meanshift", "int_skip")) {
    std::istringstream iss(cfg.get_string("meanshift", "int_skip"));
    std::string tok;
    while (std::getline(iss, tok, ',')) {
      const auto b = tok.find_first_not_of(" \t");
      const auto e = tok.find_last_not_of(" \t");
      if (b != std::string::npos) int_skip.insert(tok.substr(b, e - b + 1));
    }
  }

  for (const auto& c : covariates) {
    if (!sample.has_column(c) || !reference.has_column(c)) {
      throw InputError("covariate mismatch between cohorts: missing column '" + c + "'");
    }
  }
  if (!strata_col.empty() &&
      (!sample.has_column(strata_col) || !reference.has_column(strata_col))) {
    throw InputError("strata column '" + strata_col + "' missing from a cohort");
  }

  std::vector<pb::MeanShiftRecord> records;
  for (const auto& pheno : phenos) {
    if (!sample.has_column(pheno) || !reference.has_column(pheno)) {
      throw InputError("phenotype column '" + pheno + "' missing from a cohort");
    }
    const Eigen::VectorXd ys = sample.numeric_column(pheno);
    const Eigen::VectorXd yr = reference.numeric_column(pheno);
    const Eigen::Index ns = ys.size(), nr = yr.size();

    // Pooled vectors; the sample cohort occupies the first ns rows.
    Eigen::VectorXd pooled(ns + nr);
    pooled << ys, yr;
    Eigen::MatrixXd covs(ns + nr, static_cast<Eigen::Index>(covariates.size()));
    for (std::size_t c = 0; c < covariates.size(); ++c) {
      covs.col(static_cast<Eigen::Index>(c)) << sample.numeric_column(covariates[c]),
          reference.numeric_column(covariates[c]);
    }
    std::vector<std::string> strata(static_cast<std::size_t>(ns + nr), "");
    if (!strata_col.empty()) {
      const auto ss = sample.string_column(strata_col);
      const auto rs = reference.string_column(strata_col);
      for (Eigen::Index i = 0; i < ns; ++i) strata[static_cast<std::size_t>(i)] = ss[static_cast<std::size_t>(i)];
      for (Eigen::Index i = 0; i < nr; ++i) {
        strata[static_cast<std::size_t>(ns + i)] = rs[static_cast<std::size_t>(i)];
      }
    }

    // Complete rows only.
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < ns + nr; ++i) {
      bool ok = std::isfinite(pooled(i));
      for (Eigen::Index c = 0; ok && c < covs.cols(); ++c) ok = std::isfinite(covs(i, c));
      if (ok) keep.push_back(i);
    }
    if (keep.size() < 4) throw InputError("phenotype '" + pheno + "': too few complete rows");
    Eigen::VectorXd v(static_cast<Eigen::Index>(keep.size()));
    Eigen::MatrixXd cmat(static_cast<Eigen::Index>(keep.size()), covs.cols());
    std::vector<std::string> kst(keep.size());
    Eigen::Index n_sample_kept = 0;
    for (std::size_t k = 0; k < keep.size(); ++k) {
      v(static_cast<Eigen::Index>(k)) = pooled(keep[k]);
      cmat.row(static_cast<Eigen::Index>(k)) = covs.row(keep[k]);
      kst[k] = strata[static_cast<std::size_t>(keep[k])];
      if (keep[k] < ns) ++n_sample_kept;
    }

    // Binary phenotypes keep their 0/1 coding; the shift is then the
    // standardized prevalence difference.
    bool binary = true;
    for (Eigen::Index i = 0; i < v.size() && binary; ++i) {
      binary = (v(i) == 0.0 || v(i) == 1.0);
    }
    const bool do_int = !binary && !int_skip.count(pheno);

    // Fixed preprocessing order: rank-based inverse normal transform (within
    // strata, over the pooled cohorts), covariate residualization, then
    // standardization against the sample cohort inside the shift itself.
    Eigen::VectorXd work = do_int ? pb::rank_inverse_normal(v, kst) : v;
    if (covs.cols() > 0) work = pb::residualize(work, cmat, covariates);

    const Eigen::VectorXd s_part = work.head(n_sample_kept);
    const Eigen::VectorXd r_part = work.tail(work.size() - n_sample_kept);
    records.push_back(pb::compute_mean_shift(pheno, s_part, r_part, alpha));
    if (binary) {
      std::cerr << "note: phenotype '" << pheno
                << "' is binary; delta is the standardized prevalence difference\n";
    }
  }

  pb::write_mean_shifts(records, out_path(opts, "mean_shifts.csv"));
  write_manifest(opts, "meanshift", {opts.config_path, sample_path, reference_path});
  return 0;
}

}  // namespace

int cmd_forward_curves(const CommonOptions& opts) { return forward_curves_impl(opts); }
int cmd_adjust(const CommonOptions& opts) { return adjust_impl(opts); }
int cmd_simulate(const CommonOptions& opts) { return simulate_impl(opts); }
int cmd_meanshift(const CommonOptions& opts, const std::string& sample_path,
                  const std::string& reference_path) {
  return meanshift_impl(opts, sample_path, reference_path);
}

}  // namespace pbcli
