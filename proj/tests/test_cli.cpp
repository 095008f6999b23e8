// Integration tests that drive the built CLI binary end to end.
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "pb/io.hpp"
#include "pb/model.hpp"
#include "pb/simgen.hpp"
#include "pb/truncnorm.hpp"

using namespace pb;

namespace {

namespace fs = std::filesystem;

struct CliDir {
  fs::path path;
  CliDir() {
    path = fs::temp_directory_path() /
           ("pbcli_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~CliDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

int run_cli(const std::string& args) {
  const std::string cmd = std::string(PB_CLI_BIN) + " " + args + " 2>/dev/null";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

std::string strip_timestamp(const std::string& manifest_json) {
  return std::regex_replace(manifest_json, std::regex("\"timestamp_utc\":[^,}]*"), "");
}

const char* kSimConfig =
    "[simulation]\n"
    "n = 8000\n"
    "m = 1000\n"
    "alpha = 0.25\n"
    "h2x = 0.125\n"
    "h2y1 = 0.5\n"
    "rho_g1 = -0.3\n"
    "rho_e1 = 0.6\n"
    "h2y2 = 0.5\n"
    "rho_g2 = 0.2\n"
    "rho_e2 = 0.3\n"
    "varphi_g = 0.4\n"
    "varphi_e = 0.2\n"
    "ld_block_size = 10\n"
    "ld_block_rho = 0.8\n";

std::map<std::string, std::map<std::string, std::vector<double>>> read_results(
    const std::string& path) {
  // phenotype -> estimate_type -> [original, adjusted, se_o, se_a]
  std::map<std::string, std::map<std::string, std::vector<double>>> out;
  std::ifstream in(path);
  REQUIRE(in.good());
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) f.push_back(tok);
    REQUIRE(f.size() >= 6);
    std::vector<double> vals;
    for (int k = 2; k < 6; ++k) {
      vals.push_back(f[static_cast<std::size_t>(k)] == "nan"
                         ? std::nan("")
                         : std::stod(f[static_cast<std::size_t>(k)]));
    }
    out[f[0]][f[1]] = vals;
  }
  return out;
}

}  // namespace

TEST_CASE("simulate is deterministic and adjust consumes its output") {
  CliDir dir;
  write_text_file(dir.file("sim.cfg"), kSimConfig);
  REQUIRE(run_cli("simulate --config " + dir.file("sim.cfg") + " --seed 11 --out-dir " +
                  dir.file("s1")) == 0);
  REQUIRE(run_cli("simulate --config " + dir.file("sim.cfg") + " --seed 11 --out-dir " +
                  dir.file("s2")) == 0);
  for (const char* name : {"participation.sumstats", "y1.sumstats", "y2.sumstats",
                           "ld_scores.txt", "truth.csv", "mean_shifts.csv"}) {
    CHECK(read_text_file(dir.file("s1/" + std::string(name))) ==
          read_text_file(dir.file("s2/" + std::string(name))));
  }
  CHECK(strip_timestamp(read_text_file(dir.file("s1/manifest.json"))) ==
        strip_timestamp(read_text_file(dir.file("s2/manifest.json"))));
  // A different seed changes the data.
  REQUIRE(run_cli("simulate --config " + dir.file("sim.cfg") + " --seed 12 --out-dir " +
                  dir.file("s3")) == 0);
  CHECK(read_text_file(dir.file("s1/y1.sumstats")) !=
        read_text_file(dir.file("s3/y1.sumstats")));

  // Adjust twice on the same inputs: byte-identical results, and identical
  // under worker threads.
  const std::string adj_cfg =
      "[participation]\nalpha = 0.25\nh2x = 0.125\n\n"
      "[inputs]\n"
      "participation_sumstats = " + dir.file("s1/participation.sumstats") + "\n" +
      "ld_scores = " + dir.file("s1/ld_scores.txt") + "\n" +
      "mean_shifts = " + dir.file("s1/mean_shifts.csv") + "\n\n" +
      "[ldsc]\nblocks = 100\n\n" +
      "[phenotype y1]\nsumstats = " + dir.file("s1/y1.sumstats") + "\n\n" +
      "[phenotype y2]\nsumstats = " + dir.file("s1/y2.sumstats") + "\n";
  write_text_file(dir.file("adj.cfg"), adj_cfg);
  REQUIRE(run_cli("adjust --config " + dir.file("adj.cfg") + " --out-dir " +
                  dir.file("a1")) == 0);
  REQUIRE(run_cli("adjust --config " + dir.file("adj.cfg") + " --out-dir " +
                  dir.file("a2")) == 0);
  REQUIRE(run_cli("adjust --config " + dir.file("adj.cfg") + " --threads 4 --out-dir " +
                  dir.file("a4")) == 0);
  CHECK(read_text_file(dir.file("a1/results.csv")) ==
        read_text_file(dir.file("a2/results.csv")));
  CHECK(read_text_file(dir.file("a1/results.csv")) ==
        read_text_file(dir.file("a4/results.csv")));
  CHECK(read_text_file(dir.file("a1/pairs.csv")) ==
        read_text_file(dir.file("a4/pairs.csv")));

  const auto res = read_results(dir.file("a1/results.csv"));
  REQUIRE(res.count("y1"));
  REQUIRE(res.count("y2"));
  CHECK(std::isfinite(res.at("y1").at("h2")[1]));
  CHECK(std::isfinite(res.at("y1").at("rho_g")[1]));
  CHECK(std::isfinite(res.at("y1").at("rho_e")[1]));
  // JSONL mirror and manifest exist.
  CHECK(fs::exists(dir.file("a1/results.jsonl")));
  CHECK(fs::exists(dir.file("a1/pairs.jsonl")));
  const std::string manifest = read_text_file(dir.file("a1/manifest.json"));
  CHECK(manifest.find("\"fnv64\"") != std::string::npos);
  CHECK(manifest.find("adjust") != std::string::npos);
}

TEST_CASE("adjust on simulated data recovers the population truth within 2 SEs") {
  CliDir dir;
  write_text_file(dir.file("sim.cfg"),
                  "[simulation]\n"
                  "n = 30000\nm = 2500\nalpha = 0.25\nh2x = 0.125\n"
                  "h2y1 = 0.5\nrho_g1 = -0.3\nrho_e1 = 0.6\n"
                  "h2y2 = 0.5\nrho_g2 = 0.2\nrho_e2 = 0.3\n"
                  "varphi_g = 0.4\nvarphi_e = 0.2\n"
                  "ld_block_size = 25\nld_block_rho = 0.8\n");
  REQUIRE(run_cli("simulate --config " + dir.file("sim.cfg") + " --seed 21 --out-dir " +
                  dir.file("s")) == 0);
  const std::string adj_cfg =
      "[participation]\nalpha = 0.25\nh2x = 0.125\n\n"
      "[inputs]\n"
      "participation_sumstats = " + dir.file("s/participation.sumstats") + "\n" +
      "ld_scores = " + dir.file("s/ld_scores.txt") + "\n" +
      "mean_shifts = " + dir.file("s/mean_shifts.csv") + "\n\n" +
      "[phenotype y1]\nsumstats = " + dir.file("s/y1.sumstats") + "\n\n" +
      "[phenotype y2]\nsumstats = " + dir.file("s/y2.sumstats") + "\n";
  write_text_file(dir.file("adj.cfg"), adj_cfg);
  REQUIRE(run_cli("adjust --config " + dir.file("adj.cfg") + " --out-dir " +
                  dir.file("a")) == 0);
  const auto res = read_results(dir.file("a/results.csv"));
  // Adjusted columns against the simulation truth, at 2 jackknife SEs.
  const auto& h2_1 = res.at("y1").at("h2");
  CHECK(std::abs(h2_1[1] - 0.5) < 2.0 * h2_1[3]);
  const auto& rg_1 = res.at("y1").at("rho_g");
  CHECK(std::abs(rg_1[1] + 0.3) < 2.0 * rg_1[3]);
  const auto& re_1 = res.at("y1").at("rho_e");
  CHECK(std::abs(re_1[1] - 0.6) < 2.0 * re_1[3]);
  const auto& h2_2 = res.at("y2").at("h2");
  CHECK(std::abs(h2_2[1] - 0.5) < 2.0 * h2_2[3]);
  const auto pairs = read_results(dir.file("a/pairs.csv"));
  const auto& phi = pairs.at("y1:y2").at("phi_g");
  CHECK(std::abs(phi[1] - 0.4) < 2.0 * phi[3]);
}

TEST_CASE("adjust with alpha = 1 is the identity on h2 and rho_g") {
  CliDir dir;
  std::string sim = kSimConfig;
  sim = std::regex_replace(sim, std::regex("alpha = 0.25"), "alpha = 1.0");
  write_text_file(dir.file("sim.cfg"), sim);
  REQUIRE(run_cli("simulate --config " + dir.file("sim.cfg") + " --seed 3 --out-dir " +
                  dir.file("s")) == 0);
  const std::string adj_cfg =
      "[participation]\nalpha = 1.0\nh2x = 0.125\n\n"
      "[inputs]\n"
      "participation_sumstats = " + dir.file("s/participation.sumstats") + "\n" +
      "ld_scores = " + dir.file("s/ld_scores.txt") + "\n" +
      "mean_shifts = " + dir.file("s/mean_shifts.csv") + "\n\n" +
      "[ldsc]\nblocks = 100\n\n" +
      "[phenotype y1]\nsumstats = " + dir.file("s/y1.sumstats") + "\n";
  write_text_file(dir.file("adj.cfg"), adj_cfg);
  REQUIRE(run_cli("adjust --config " + dir.file("adj.cfg") + " --out-dir " +
                  dir.file("a")) == 0);
  const auto res = read_results(dir.file("a/results.csv"));
  const auto& h2 = res.at("y1").at("h2");
  CHECK(h2[1] == doctest::Approx(h2[0]).epsilon(1e-12));
  const auto& rg = res.at("y1").at("rho_g");
  CHECK(rg[1] == doctest::Approx(rg[0]).epsilon(1e-10));
  // rho_e is not identifiable without selection.
  CHECK(std::isnan(res.at("y1").at("rho_e")[1]));
}

TEST_CASE("forward-curves reproduces the model exactly") {
  CliDir dir;
  write_text_file(dir.file("c.cfg"),
                  "[curves]\n"
                  "h2x = 0.125\n"
                  "h2y = 0.5\n"
                  "alphas = 0.1, 0.5, 1\n"
                  "rho_g = -0.3, 0, 0.3\n"
                  "rho_e = 0, 0.3\n"
                  "varphi_g = 0.4\n"
                  "varphi_e = 0.2\n");
  REQUIRE(run_cli("forward-curves --config " + dir.file("c.cfg") + " --out-dir " +
                  dir.file("out")) == 0);
  std::ifstream in(dir.file("out/forward_curves.csv"));
  REQUIRE(in.good());
  std::string line;
  std::getline(in, line);
  const ParticipationParams part{0.125};
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) f.push_back(tok);
    REQUIRE(f.size() >= 10);
    const std::string quantity = f[0];
    const double alpha = std::stod(f[1]);
    const double rg = std::stod(f[4]);
    const double re = std::stod(f[5]);
    const double population = std::stod(f[8]);
    const double apparent = std::stod(f[9]);
    const SelectionContext sel = make_selection_context(alpha);
    const PhenotypeParams y{0.5, rg, re};
    if (quantity == "h2_pb") {
      CHECK(apparent == apparent_h2(part, y, sel));
      if (alpha == 1.0) CHECK(apparent == population);
      if (re == 0.0) CHECK(apparent <= 0.5 + 1e-15);
    } else if (quantity == "rho_g_pb") {
      CHECK(apparent == apparent_participation_gcor(part, y, sel));
      if (alpha == 1.0) CHECK(apparent == doctest::Approx(population).epsilon(1e-12));
    } else if (quantity == "delta") {
      CHECK(apparent == mean_shift(part, y, sel));
    } else if (quantity == "phi_g_pb") {
      const PairParams pair{y, y, 0.4, 0.2};
      if (pair_params_valid(pair)) {
        CHECK(apparent == apparent_pair_gcor(part, pair, sel));
      }
    }
  }
  CHECK(rows == 3 * 2 * 3 * 4);
}

TEST_CASE("meanshift command") {
  CliDir dir;
  // Table with an exact one-unit injected shift and a covariate.
  std::ostringstream s, r;
  s << "pheno,age\n";
  r << "pheno,age\n";
  for (int i = 0; i < 200; ++i) {
    const double age = 40.0 + (i % 25);
    const double base = 0.01 * i + 0.2 * age;
    s << base + 1.0 << ',' << age << '\n';
    r << base << ',' << age << '\n';
  }
  write_text_file(dir.file("sample.csv"), s.str());
  write_text_file(dir.file("ref.csv"), r.str());
  write_text_file(dir.file("ms.cfg"),
                  "[meanshift]\n"
                  "alpha = 0.055\n"
                  "phenotypes = pheno\n"
                  "covariates = age\n"
                  "int_skip = pheno\n");
  REQUIRE(run_cli("meanshift --config " + dir.file("ms.cfg") + " --sample " +
                  dir.file("sample.csv") + " --reference " + dir.file("ref.csv") +
                  " --out-dir " + dir.file("out")) == 0);
  const auto recs = read_mean_shifts(dir.file("out/mean_shifts.csv"));
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].alpha == 0.055);
  CHECK(recs[0].n_sample == 200);
  // The injected shift of 1.0 in the phenotype, against the sample residual SD.
  CHECK(recs[0].delta_hat > 0.5);

  // Identical tables give exactly zero.
  REQUIRE(run_cli("meanshift --config " + dir.file("ms.cfg") + " --sample " +
                  dir.file("ref.csv") + " --reference " + dir.file("ref.csv") +
                  " --out-dir " + dir.file("zero")) == 0);
  const auto zero = read_mean_shifts(dir.file("zero/mean_shifts.csv"));
  CHECK(zero[0].delta_hat == 0.0);

  // Covariate mismatch is an input error.
  write_text_file(dir.file("noage.csv"), "pheno\n1\n2\n3\n4\n");
  CHECK(run_cli("meanshift --config " + dir.file("ms.cfg") + " --sample " +
                dir.file("noage.csv") + " --reference " + dir.file("ref.csv") +
                " --out-dir " + dir.file("bad")) == 2);
}

TEST_CASE("meanshift on a selected cohort matches the forward formula") {
  CliDir dir;
  const ParticipationParams part{0.125};
  const PhenotypeParams y{0.5, 0.3, 0.3};
  const SelectionContext sel = make_selection_context(0.1);
  const MvnCohort cohort = simulate_mvn(part, y, sel, 150000, 2026);
  std::ostringstream sample, reference;
  sample << "y\n";
  reference << "y\n";
  Eigen::Index n_sel = 0;
  for (Eigen::Index i = 0; i < cohort.n(); ++i) {
    reference << format_double(cohort.y1(i)) << '\n';
    if (cohort.selected(i)) {
      sample << format_double(cohort.y1(i)) << '\n';
      ++n_sel;
    }
  }
  write_text_file(dir.file("sample.csv"), sample.str());
  write_text_file(dir.file("ref.csv"), reference.str());
  write_text_file(dir.file("ms.cfg"),
                  "[meanshift]\nalpha = 0.1\nphenotypes = y\nint_skip = y\n");
  REQUIRE(run_cli("meanshift --config " + dir.file("ms.cfg") + " --sample " +
                  dir.file("sample.csv") + " --reference " + dir.file("ref.csv") +
                  " --out-dir " + dir.file("out")) == 0);
  const auto recs = read_mean_shifts(dir.file("out/mean_shifts.csv"));
  REQUIRE(recs.size() == 1);
  const double closed = mean_shift(part, y, sel);
  CHECK(std::abs(recs[0].delta_hat - closed) <
        3.0 / std::sqrt(static_cast<double>(n_sel)));
}

TEST_CASE("exit codes") {
  CliDir dir;
  // Missing config file: input error.
  CHECK(run_cli("adjust --config " + dir.file("nope.cfg") + " --out-dir " +
                dir.file("x")) == 2);
  // Free-intercept regression without LD-score leverage: numeric error.
  write_text_file(dir.file("sim.cfg"),
                  "[simulation]\n"
                  "n = 4000\nm = 400\nalpha = 0.5\nh2x = 0.125\nh2y1 = 0.5\n"
                  "rho_g1 = 0.2\nrho_e1 = 0.2\n");
  REQUIRE(run_cli("simulate --config " + dir.file("sim.cfg") + " --seed 5 --out-dir " +
                  dir.file("s")) == 0);
  write_text_file(dir.file("adj.cfg"),
                  "[participation]\nalpha = 0.5\nh2x = 0.125\n\n"
                  "[inputs]\n"
                  "participation_sumstats = " + dir.file("s/participation.sumstats") + "\n" +
                  "mean_shifts = " + dir.file("s/mean_shifts.csv") + "\n\n" +
                  "[ldsc]\nblocks = 50\n\n" +
                  "[phenotype y1]\nsumstats = " + dir.file("s/y1.sumstats") + "\n");
  CHECK(run_cli("adjust --config " + dir.file("adj.cfg") + " --out-dir " +
                dir.file("a")) == 3);
  // Same config with a fixed intercept succeeds.
  write_text_file(dir.file("adj2.cfg"),
                  "[participation]\nalpha = 0.5\nh2x = 0.125\n\n"
                  "[inputs]\n"
                  "participation_sumstats = " + dir.file("s/participation.sumstats") + "\n" +
                  "mean_shifts = " + dir.file("s/mean_shifts.csv") + "\n\n" +
                  "[ldsc]\nblocks = 50\nfix_intercept = true\n\n" +
                  "[phenotype y1]\nsumstats = " + dir.file("s/y1.sumstats") + "\n");
  CHECK(run_cli("adjust --config " + dir.file("adj2.cfg") + " --out-dir " +
                dir.file("a2")) == 0);
}
