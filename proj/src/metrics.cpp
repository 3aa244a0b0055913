#include "xreid/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <stdexcept>

#include "xreid/data.hpp"
#include "xreid/rng.hpp"

namespace xreid {

std::vector<std::vector<double>> distance_matrix(const std::vector<std::vector<float>>& query,
                                                 const std::vector<std::vector<float>>& gallery) {
  if (query.empty() || gallery.empty())
    throw std::invalid_argument("distance_matrix: empty query or gallery set");
  const size_t d = query[0].size();
  for (const auto& v : query)
    if (v.size() != d) throw std::invalid_argument("distance_matrix: ragged query embeddings");
  for (const auto& v : gallery)
    if (v.size() != d)
      throw std::invalid_argument("distance_matrix: gallery embedding dim mismatch");
  std::vector<std::vector<double>> dist(query.size(), std::vector<double>(gallery.size(), 0.0));
  for (size_t i = 0; i < query.size(); ++i) {
    for (size_t j = 0; j < gallery.size(); ++j) {
      double acc = 0.0;
      for (size_t k = 0; k < d; ++k) {
        const double diff = static_cast<double>(query[i][k]) - static_cast<double>(gallery[j][k]);
        acc += diff * diff;
      }
      dist[i][j] = acc;
    }
  }
  return dist;
}

namespace {

void check_protocol(const std::vector<std::vector<double>>& dist, const std::vector<int>& query_id,
                    const std::vector<int>& gallery_id, const char* op) {
  if (dist.size() != query_id.size())
    throw std::invalid_argument(std::string(op) + ": distance rows do not match query labels");
  if (query_id.empty()) throw std::invalid_argument(std::string(op) + ": empty query set");
  if (gallery_id.empty()) throw std::invalid_argument(std::string(op) + ": empty gallery set");
  for (const auto& row : dist)
    if (row.size() != gallery_id.size())
      throw std::invalid_argument(std::string(op) + ": distance columns do not match gallery labels");
  for (size_t i = 0; i < query_id.size(); ++i) {
    if (std::find(gallery_id.begin(), gallery_id.end(), query_id[i]) == gallery_id.end())
      throw std::invalid_argument(std::string(op) + ": query " + std::to_string(i) +
                                  " (identity " + std::to_string(query_id[i]) +
                                  ") has no gallery image");
  }
}

// Gallery order for one query: distance ascending, index ascending on ties.
std::vector<size_t> ranking(const std::vector<double>& row) {
  std::vector<size_t> order(row.size());
  for (size_t j = 0; j < order.size(); ++j) order[j] = j;
  std::sort(order.begin(), order.end(), [&row](size_t a, size_t b) {
    if (row[a] != row[b]) return row[a] < row[b];
    return a < b;
  });
  return order;
}

}  // namespace

std::vector<double> cmc(const std::vector<std::vector<double>>& dist,
                        const std::vector<int>& query_id, const std::vector<int>& gallery_id,
                        const std::vector<int>& ks) {
  check_protocol(dist, query_id, gallery_id, "cmc");
  for (int k : ks)
    if (k < 1) throw std::invalid_argument("cmc: ranks must be >= 1");
  std::vector<double> rates(ks.size(), 0.0);
  for (size_t i = 0; i < query_id.size(); ++i) {
    const auto order = ranking(dist[i]);
    size_t first_hit = order.size();
    for (size_t r = 0; r < order.size(); ++r) {
      if (gallery_id[order[r]] == query_id[i]) {
        first_hit = r;
        break;
      }
    }
    for (size_t t = 0; t < ks.size(); ++t)
      if (first_hit < static_cast<size_t>(ks[t])) rates[t] += 1.0;
  }
  for (auto& r : rates) r /= static_cast<double>(query_id.size());
  return rates;
}

double mean_ap(const std::vector<std::vector<double>>& dist, const std::vector<int>& query_id,
               const std::vector<int>& gallery_id) {
  check_protocol(dist, query_id, gallery_id, "mean_ap");
  double total = 0.0;
  for (size_t i = 0; i < query_id.size(); ++i) {
    const auto order = ranking(dist[i]);
    int relevant = 0;
    for (int gid : gallery_id)
      if (gid == query_id[i]) ++relevant;
    double ap = 0.0;
    int hits = 0;
    for (size_t r = 0; r < order.size(); ++r) {
      if (gallery_id[order[r]] == query_id[i]) {
        ++hits;
        ap += static_cast<double>(hits) / static_cast<double>(r + 1);
      }
    }
    total += ap / static_cast<double>(relevant);
  }
  return total / static_cast<double>(query_id.size());
}

EvalResult evaluate(const RetrievalRun& run, SearchMode search, ShotMode shot, int trials,
                    uint64_t seed) {
  if (run.query_emb.size() != run.query_id.size() || run.query_id.size() != run.query_cam.size())
    throw std::invalid_argument("evaluate: query fields disagree in length");
  if (run.gallery_emb.size() != run.gallery_id.size() ||
      run.gallery_id.size() != run.gallery_cam.size())
    throw std::invalid_argument("evaluate: gallery fields disagree in length");
  if (trials < 1) throw std::invalid_argument("evaluate: trials must be >= 1");

  // Camera filter: indoor search drops gallery items shot on outdoor cameras.
  std::vector<size_t> keep;
  for (size_t j = 0; j < run.gallery_id.size(); ++j) {
    if (search == SearchMode::kIndoor && is_outdoor_camera(run.gallery_cam[j])) continue;
    keep.push_back(j);
  }
  if (keep.empty())
    throw std::invalid_argument("evaluate: gallery is empty after the " +
                                search_mode_name(search) + "-search camera filter");

  std::vector<std::vector<float>> gal_emb;
  std::vector<int> gal_id, gal_cam;
  gal_emb.reserve(keep.size());
  for (size_t j : keep) {
    gal_emb.push_back(run.gallery_emb[j]);
    gal_id.push_back(run.gallery_id[j]);
    gal_cam.push_back(run.gallery_cam[j]);
  }

  const auto dist = distance_matrix(run.query_emb, gal_emb);
  const std::vector<int> ks = {1, 5, 10, 20};

  auto score = [&](const std::vector<size_t>& cols) {
    std::vector<std::vector<double>> sub(dist.size(), std::vector<double>(cols.size()));
    std::vector<int> ids(cols.size());
    for (size_t i = 0; i < dist.size(); ++i)
      for (size_t c = 0; c < cols.size(); ++c) sub[i][c] = dist[i][cols[c]];
    for (size_t c = 0; c < cols.size(); ++c) ids[c] = gal_id[cols[c]];
    EvalResult r;
    const auto rates = cmc(sub, run.query_id, ids, ks);
    r.r1 = rates[0];
    r.r5 = rates[1];
    r.r10 = rates[2];
    r.r20 = rates[3];
    r.mean_ap = mean_ap(sub, run.query_id, ids);
    return r;
  };

  if (shot == ShotMode::kMulti) {
    std::vector<size_t> all(gal_id.size());
    for (size_t j = 0; j < all.size(); ++j) all[j] = j;
    return score(all);
  }

  // Single-shot: one gallery image per (identity, camera) per trial.
  std::map<std::pair<int, int>, std::vector<size_t>> groups;
  for (size_t j = 0; j < gal_id.size(); ++j)
    groups[{gal_id[j], gal_cam[j]}].push_back(j);

  Rng rng(seed);
  EvalResult mean;
  for (int t = 0; t < trials; ++t) {
    std::vector<size_t> cols;
    cols.reserve(groups.size());
    for (const auto& [key, members] : groups)
      cols.push_back(members[rng.uniform_index(static_cast<uint32_t>(members.size()))]);
    const EvalResult r = score(cols);
    mean.r1 += r.r1;
    mean.r5 += r.r5;
    mean.r10 += r.r10;
    mean.r20 += r.r20;
    mean.mean_ap += r.mean_ap;
  }
  mean.r1 /= trials;
  mean.r5 /= trials;
  mean.r10 /= trials;
  mean.r20 /= trials;
  mean.mean_ap /= trials;
  return mean;
}

std::string eval_csv_row(const EvalResult& r, SearchMode search, ShotMode shot) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%s,%s,%.6f,%.6f,%.6f,%.6f,%.6f",
                search_mode_name(search).c_str(), shot_mode_name(shot).c_str(), r.r1, r.r5, r.r10,
                r.r20, r.mean_ap);
  return buf;
}

}  // namespace xreid
