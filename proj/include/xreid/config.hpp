#pragma once

#include <string>
#include <vector>

namespace xreid {

enum class IdMode { kGlobal, kPart };
enum class CenterVariant { kNone, kPlain, kMargin, kExp };
enum class ChannelPool { kAvgMax, kAvgOnly, kMaxOnly };
enum class SearchMode { kAll, kIndoor };
enum class ShotMode { kMulti, kSingle };

// Flat run configuration. File syntax is one `key = value` per line with `#`
// comments; CLI overrides are applied after the file and unknown keys are
// rejected in both paths.
struct RunConfig {
  // encoder geometry and widths
  int img_h = 96;
  int img_w = 32;
  int stem_channels = 16;
  int trunk_channels = 32;
  int out_d = 64;
  int embed_dim = 128;

  // part-attention pyramid
  std::vector<int> scales = {6, 3, 1};  // stored fine-to-coarse (descending part counts)
  int reduction = 4;
  int spatial_kernel = 3;
  bool use_channel_gate = true;
  bool use_spatial_gate = true;
  ChannelPool channel_pool = ChannelPool::kAvgMax;

  // loss
  double margin = 1.0;
  double lambda = 1.0;
  double exponent_clamp = 30.0;
  IdMode id_mode = IdMode::kGlobal;
  CenterVariant center_variant = CenterVariant::kExp;

  // optimizer
  double lr0 = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int decay_every = 10;
  double decay_factor = 0.1;

  // batch composition: P identities x M images per modality
  int sampler_p = 8;
  int sampler_m = 4;

  // synthetic data defaults (used by gen-data)
  int data_ids = 20;
  int data_per_id = 8;
  int data_latent_dim = 16;
  double data_noise_sigma = 0.15;

  // run control
  int epochs = 30;
  uint64_t seed = 0;

  // evaluation protocol
  SearchMode search = SearchMode::kAll;
  ShotMode shot = ShotMode::kMulti;
  int eval_trials = 10;
  uint64_t eval_seed = 0;

  // Derived spatial extents of the backbone output (two stride-2 blocks).
  int out_h() const { return img_h / 4; }
  int out_w() const { return img_w / 4; }

  // Applies one key/value pair; throws std::invalid_argument on unknown keys
  // or unparsable values.
  void apply(const std::string& key, const std::string& value);

  // Reads a config file and applies every pair in order.
  void load_file(const std::string& path);

  // Applies "key=value" strings (CLI overrides).
  void apply_overrides(const std::vector<std::string>& overrides);

  // Cross-field sanity checks; throws std::invalid_argument on violations.
  void validate() const;
};

std::string id_mode_name(IdMode m);
std::string center_variant_name(CenterVariant v);
std::string search_mode_name(SearchMode m);
std::string shot_mode_name(ShotMode m);
std::string scales_to_string(const std::vector<int>& scales);
std::vector<int> parse_scales(const std::string& text);

// Full key=value dump, loadable by RunConfig::load_file. Stored inside every
// checkpoint so evaluation can rebuild the exact model.
std::string config_to_text(const RunConfig& cfg);

}  // namespace xreid
