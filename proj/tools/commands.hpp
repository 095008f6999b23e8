// Subcommand implementations behind the pbadjust CLI.
#pragma once

#include <cstdint>
#include <string>

namespace pbcli {

struct CommonOptions {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 1;
  int blocks = 0;  // 0 = use config value / default
  int threads = 1;
};

int cmd_forward_curves(const CommonOptions& opts);
int cmd_adjust(const CommonOptions& opts);
int cmd_simulate(const CommonOptions& opts);
int cmd_meanshift(const CommonOptions& opts, const std::string& sample_path,
                  const std::string& reference_path);

}  // namespace pbcli
