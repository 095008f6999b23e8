// pbadjust: participation-bias diagnostics and corrections for heritability
// and genetic correlation estimates, plus the simulation engine used to
// validate them.
#include <CLI11.hpp>
#include <iostream>
#include <string>

#include <json.hpp>

#include "commands.hpp"
#include "pb/errors.hpp"
#include "pb/version.hpp"

namespace {

void print_error(const std::string& message, int code) {
  nlohmann::json j;
  j["error"] = message;
  j["code"] = code;
  std::cerr << j.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"participation-bias adjustment toolkit"};
  app.set_version_flag("--version", pb::kVersion);
  app.require_subcommand(1);

  pbcli::CommonOptions opts;
  std::string sample_path, reference_path;

  auto add_common = [&](CLI::App* cmd, bool needs_seed) {
    cmd->add_option("--config", opts.config_path, "configuration file")->required();
    cmd->add_option("--out-dir", opts.out_dir, "output directory")->required();
    cmd->add_option("--threads", opts.threads, "worker threads (default 1)");
    if (needs_seed) cmd->add_option("--seed", opts.seed, "random seed (default 1)");
  };

  CLI::App* curves = app.add_subcommand("forward-curves",
                                        "theory curves: apparent vs population values");
  add_common(curves, false);

  CLI::App* adjust = app.add_subcommand(
      "adjust", "adjust heritability / genetic correlation estimates for participation bias");
  add_common(adjust, false);
  adjust->add_option("--blocks", opts.blocks, "jackknife block count (default from config)");

  CLI::App* simulate =
      app.add_subcommand("simulate", "simulate a SNP cohort with threshold participation");
  add_common(simulate, true);

  CLI::App* meanshift = app.add_subcommand(
      "meanshift", "sample-vs-reference mean shifts after the fixed preprocessing");
  add_common(meanshift, false);
  meanshift->add_option("--sample", sample_path, "participant cohort table")->required();
  meanshift->add_option("--reference", reference_path, "population reference table")
      ->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (curves->parsed()) return pbcli::cmd_forward_curves(opts);
    if (adjust->parsed()) return pbcli::cmd_adjust(opts);
    if (simulate->parsed()) return pbcli::cmd_simulate(opts);
    if (meanshift->parsed()) return pbcli::cmd_meanshift(opts, sample_path, reference_path);
  } catch (const pb::InputError& e) {
    print_error(e.what(), 2);
    return 2;
  } catch (const pb::NumericError& e) {
    print_error(e.what(), 3);
    return 3;
  } catch (const std::exception& e) {
    print_error(e.what(), 2);
    return 2;
  }
  return 0;
}
