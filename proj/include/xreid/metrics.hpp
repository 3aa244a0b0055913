#pragma once

#include <string>
#include <vector>

#include "xreid/config.hpp"

namespace xreid {

// Inputs to retrieval evaluation: embeddings plus identity/camera labels for
// both sides of the search.
struct RetrievalRun {
  std::vector<std::vector<float>> query_emb;
  std::vector<int> query_id;
  std::vector<int> query_cam;
  std::vector<std::vector<float>> gallery_emb;
  std::vector<int> gallery_id;
  std::vector<int> gallery_cam;
};

struct EvalResult {
  double r1 = 0, r5 = 0, r10 = 0, r20 = 0;
  double mean_ap = 0;
};

// Squared Euclidean distances, accumulated in double. dist[i][j] is query i
// against gallery j.
std::vector<std::vector<double>> distance_matrix(const std::vector<std::vector<float>>& query,
                                                 const std::vector<std::vector<float>>& gallery);

// Rank-k match rates. The ranking sorts each query's gallery by distance
// ascending with gallery index as the tie-breaker. Every query identity must
// occur in the gallery.
std::vector<double> cmc(const std::vector<std::vector<double>>& dist,
                        const std::vector<int>& query_id, const std::vector<int>& gallery_id,
                        const std::vector<int>& ks);

// Mean average precision with AP = (1/R) * sum over hit ranks r of
// (hits_so_far / r), R the number of relevant gallery items per query.
double mean_ap(const std::vector<std::vector<double>>& dist, const std::vector<int>& query_id,
               const std::vector<int>& gallery_id);

// Full protocol: camera filtering (indoor search drops outdoor-rgb gallery
// items), multi-shot (whole filtered gallery) or single-shot (one gallery
// image per identity per camera, seeded, averaged over trials).
EvalResult evaluate(const RetrievalRun& run, SearchMode search, ShotMode shot, int trials,
                    uint64_t seed);

// CSV row "mode,shot,r1,r5,r10,r20,mAP" (header written by callers).
std::string eval_csv_row(const EvalResult& r, SearchMode search, ShotMode shot);

}  // namespace xreid
