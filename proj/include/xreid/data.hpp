#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "xreid/encoder.hpp"
#include "xreid/rng.hpp"

namespace xreid {

// Camera layout mirrors a two-modality surveillance rig: four color cameras
// (1,2 outdoor; 3,4 indoor) and two infrared cameras (5,6).
constexpr int kOutdoorRgbCams[2] = {1, 2};
constexpr int kIndoorRgbCams[2] = {3, 4};
constexpr int kIrCams[2] = {5, 6};

inline bool is_outdoor_camera(int cam) { return cam == 1 || cam == 2; }

struct SynthConfig {
  int n_ids = 20;
  int per_id = 8;  // images per identity per modality
  int latent_dim = 16;
  double noise_sigma = 0.15;
  int img_h = 96;
  int img_w = 32;
  uint64_t seed = 0;
};

enum class Split { kTrain, kQuery, kGallery };

std::string split_name(Split s);

struct Record {
  std::string image_id;
  int identity = 0;  // 1-based in the manifest
  Modality modality = Modality::kRgb;
  int camera = 0;
  Split split = Split::kTrain;
  std::string path;  // relative to the manifest directory
};

struct Dataset {
  std::string root;
  std::vector<Record> records;
  std::vector<std::vector<float>> pixels;  // parallel to records once loaded

  const std::vector<float>& image(size_t record_idx) const;
};

// Writes blobs/ + manifest.csv under out_dir. Each identity gets one latent
// vector; the two modality maps are shared across identities; every image is
// its modality map applied to the identity latent plus iid Gaussian noise.
// The last max(1, per_id/4) images per (identity, modality) are held out for
// evaluation: held-out ir becomes the query split, held-out rgb the gallery.
// Returns the number of manifest records (n_ids * per_id * 2).
int generate_dataset(const SynthConfig& cfg, const std::string& out_dir);

// Reads manifest.csv (records only; call load_pixels for the blobs).
Dataset load_manifest(const std::string& manifest_path);

// Loads every referenced blob into memory.
void load_pixels(Dataset& ds);

// ---- identity-balanced batch sampling ----

// Index of the train split: identity -> per-modality record positions.
struct TrainIndex {
  std::vector<int> identities;  // ascending
  std::map<int, std::vector<int>> rgb_records;
  std::map<int, std::vector<int>> ir_records;

  static TrainIndex build(const Dataset& ds);
};

// One training batch: P identities x (M rgb + M ir), id-major, rgb block
// before ir block within each identity. size() == 2*P*M.
struct Batch {
  std::vector<int> record_idx;
  std::vector<int> identity;       // 1-based, parallel to record_idx
  std::vector<Modality> modality;  // parallel to record_idx
};

// Draws P identities without replacement, then M images per modality per
// identity without replacement. Throws when P exceeds the identity count or
// an identity lacks M images in either modality (naming the identity).
Batch sample_batch(const Dataset& ds, const TrainIndex& index, int P, int M, Rng& rng);

}  // namespace xreid
