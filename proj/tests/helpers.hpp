// Shared helpers for the test binaries: a scratch-directory factory and a
// small-but-valid run configuration that keeps graph sizes tiny.
#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>

#include <unistd.h>

#include "xreid/config.hpp"

namespace testutil {

// Fresh empty directory under the system temp root, unique per process so
// parallel test binaries never collide.
inline std::filesystem::path make_temp_dir(const std::string& prefix) {
  static int counter = 0;
  const auto dir = std::filesystem::temp_directory_path() /
                   (prefix + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline xreid::RunConfig tiny_config() {
  xreid::RunConfig cfg;
  cfg.img_h = 8;
  cfg.img_w = 4;
  cfg.stem_channels = 4;
  cfg.trunk_channels = 6;
  cfg.out_d = 8;
  cfg.embed_dim = 8;
  cfg.scales = {2, 1};
  cfg.reduction = 2;
  cfg.sampler_p = 2;
  cfg.sampler_m = 2;
  cfg.data_ids = 3;
  cfg.data_per_id = 4;
  cfg.data_latent_dim = 4;
  cfg.data_noise_sigma = 0.1;
  cfg.epochs = 2;
  return cfg;
}

}  // namespace testutil
