#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "xreid/metrics.hpp"
#include "xreid/model.hpp"
#include "xreid/optim.hpp"

namespace xreid {

struct EpochLog {
  int epoch = 0;
  double id_loss = 0;
  double center_loss = 0;
  double total_loss = 0;
  double lr = 0;
  double intra_class_dist = 0;
  double wall_s = 0;  // measured time; kept out of the deterministic log file
};

struct TrainOutput {
  std::vector<EpochLog> logs;
  std::vector<int> class_to_identity;  // class index -> 1-based identity
};

namespace detail {

inline std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

// Mean distance of embeddings to their per-class mean, over everything the
// epoch touched.
inline double mean_intra_class_distance(
    const std::map<int, std::vector<std::vector<float>>>& by_class) {
  double total = 0;
  size_t count = 0;
  for (const auto& [cls, embs] : by_class) {
    if (embs.empty()) continue;
    const size_t d = embs[0].size();
    std::vector<double> mu(d, 0.0);
    for (const auto& e : embs)
      for (size_t k = 0; k < d; ++k) mu[k] += e[k];
    for (auto& v : mu) v /= static_cast<double>(embs.size());
    for (const auto& e : embs) {
      double acc = 0;
      for (size_t k = 0; k < d; ++k) {
        const double diff = e[k] - mu[k];
        acc += diff * diff;
      }
      total += std::sqrt(acc);
      ++count;
    }
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

}  // namespace detail

inline void save_model_checkpoint(const Model<float>& model, const std::string& dir) {
  save_checkpoint(dir, model.snapshot());
  std::ofstream cf(std::filesystem::path(dir) / "config.txt", std::ios::trunc);
  if (!cf) throw IoError("save_model_checkpoint: cannot write config in: " + dir);
  cf << config_to_text(model.cfg);
}

// Rebuilds the exact model a checkpoint was saved from: the stored config
// fixes the architecture, the centers tensor fixes the class count.
inline Model<float> model_from_checkpoint(const std::string& dir) {
  RunConfig cfg;
  cfg.load_file((std::filesystem::path(dir) / "config.txt").string());
  const auto saved = load_checkpoint(dir);
  int n_classes = -1;
  for (const auto& [name, t] : saved)
    if (name == "centers" && t.shape.size() == 2) n_classes = t.shape[0];
  if (n_classes <= 0)
    throw IoError("model_from_checkpoint: no centers tensor in checkpoint: " + dir);
  Model<float> m = Model<float>::init(cfg, n_classes, 0);
  m.restore(saved);
  return m;
}

// Trains in place. When out_dir is non-empty, writes:
//   train_log.csv   epoch,id_loss,center_loss,total_loss,lr,intra_class_dist
//   timing.csv      epoch,wall_s (measured, intentionally outside train_log)
//   checkpoint_init/ and checkpoint_epoch_NNN/ directories
// Log rows are appended as epochs finish and formatted with fixed precision,
// so identical config+seed reruns produce identical bytes.
inline TrainOutput train_model(Model<float>& model, const Dataset& ds, const std::string& out_dir,
                               std::ostream* console = nullptr) {
  const RunConfig& cfg = model.cfg;
  const TrainIndex index = TrainIndex::build(ds);
  if (index.identities.empty())
    throw std::invalid_argument("train_model: dataset has no training records");

  TrainOutput out;
  out.class_to_identity = index.identities;
  std::map<int, int> class_of;
  for (size_t c = 0; c < index.identities.size(); ++c)
    class_of[index.identities[static_cast<size_t>(c)]] = static_cast<int>(c);
  if (static_cast<int>(index.identities.size()) != model.n_classes)
    throw std::invalid_argument("train_model: model built for " + std::to_string(model.n_classes) +
                                " classes but dataset has " +
                                std::to_string(index.identities.size()) + " training identities");

  int n_train = 0;
  for (const auto& [id, v] : index.rgb_records) n_train += static_cast<int>(v.size());
  for (const auto& [id, v] : index.ir_records) n_train += static_cast<int>(v.size());
  const int batch_size = 2 * cfg.sampler_p * cfg.sampler_m;
  const int batches_per_epoch = std::max(1, (n_train + batch_size - 1) / batch_size);

  OptimConfig ocfg{cfg.lr0, cfg.momentum, cfg.weight_decay, cfg.decay_every, cfg.decay_factor};
  SgdState<float> state;
  Rng sampler_rng(cfg.seed + 1);

  std::ofstream log_file, timing_file;
  if (!out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("train_model: cannot create output directory: " + out_dir);
    log_file.open(std::filesystem::path(out_dir) / "train_log.csv", std::ios::trunc);
    timing_file.open(std::filesystem::path(out_dir) / "timing.csv", std::ios::trunc);
    if (!log_file || !timing_file)
      throw IoError("train_model: cannot open log files in: " + out_dir);
    log_file << "epoch,id_loss,center_loss,total_loss,lr,intra_class_dist\n";
    timing_file << "epoch,wall_s\n";
    save_model_checkpoint(model, (std::filesystem::path(out_dir) / "checkpoint_init").string());
  }

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    double sum_id = 0, sum_center = 0, sum_total = 0;
    std::map<int, std::vector<std::vector<float>>> epoch_embs;

    for (int b = 0; b < batches_per_epoch; ++b) {
      const Batch batch = sample_batch(ds, index, cfg.sampler_p, cfg.sampler_m, sampler_rng);
      std::vector<const std::vector<float>*> images;
      std::vector<int> labels;
      images.reserve(batch.record_idx.size());
      labels.reserve(batch.record_idx.size());
      for (size_t i = 0; i < batch.record_idx.size(); ++i) {
        images.push_back(&ds.image(static_cast<size_t>(batch.record_idx[i])));
        labels.push_back(class_of.at(batch.identity[i]));
      }

      model.zero_grads();
      auto loss = model.batch_loss(images, batch.modality, labels);
      const double total = static_cast<double>(loss.total.scalar());
      if (!std::isfinite(total))
        throw NumericError("train_model: non-finite loss at epoch " + std::to_string(epoch) +
                           " batch " + std::to_string(b));
      loss.total.backward();
      sgd_step(model.params, state, ocfg, epoch);
      renormalize_centers(model.centers);

      sum_id += loss.id_value;
      sum_center += loss.center_value;
      sum_total += total;
      for (size_t i = 0; i < labels.size(); ++i)
        epoch_embs[labels[i]].push_back(std::move(loss.embeddings[i]));
    }

    EpochLog row;
    row.epoch = epoch;
    row.id_loss = sum_id / batches_per_epoch;
    row.center_loss = sum_center / batches_per_epoch;
    row.total_loss = sum_total / batches_per_epoch;
    row.lr = lr_at_epoch(ocfg, epoch);
    row.intra_class_dist = detail::mean_intra_class_distance(epoch_embs);
    row.wall_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.logs.push_back(row);

    if (!out_dir.empty()) {
      log_file << row.epoch << ',' << detail::fmt_g(row.id_loss) << ','
               << detail::fmt_g(row.center_loss) << ',' << detail::fmt_g(row.total_loss) << ','
               << detail::fmt_g(row.lr) << ',' << detail::fmt_g(row.intra_class_dist) << '\n';
      log_file.flush();
      timing_file << row.epoch << ',' << detail::fmt_g(row.wall_s) << '\n';
      timing_file.flush();
      char name[40];
      std::snprintf(name, sizeof(name), "checkpoint_epoch_%03d", epoch + 1);
      save_model_checkpoint(model, (std::filesystem::path(out_dir) / name).string());
    }
    if (console) {
      *console << "epoch " << row.epoch << " id=" << detail::fmt_g(row.id_loss)
               << " center=" << detail::fmt_g(row.center_loss)
               << " total=" << detail::fmt_g(row.total_loss) << " lr=" << detail::fmt_g(row.lr)
               << " intra=" << detail::fmt_g(row.intra_class_dist)
               << " wall=" << detail::fmt_g(row.wall_s) << "s\n";
      console->flush();
    }
  }
  if (!out_dir.empty() && cfg.epochs > 0)
    save_model_checkpoint(model, (std::filesystem::path(out_dir) / "checkpoint_final").string());
  return out;
}

// Embeds the query and gallery splits for retrieval evaluation.
inline RetrievalRun build_retrieval_run(const Model<float>& model, const Dataset& ds) {
  RetrievalRun run;
  for (size_t i = 0; i < ds.records.size(); ++i) {
    const Record& r = ds.records[i];
    if (r.split == Split::kTrain) continue;
    const auto f = model.forward(model.image_tensor(ds.image(i), r.modality), r.modality, false);
    std::vector<float> emb(f.embedding.value().begin(), f.embedding.value().end());
    if (r.split == Split::kQuery) {
      run.query_emb.push_back(std::move(emb));
      run.query_id.push_back(r.identity);
      run.query_cam.push_back(r.camera);
    } else {
      run.gallery_emb.push_back(std::move(emb));
      run.gallery_id.push_back(r.identity);
      run.gallery_cam.push_back(r.camera);
    }
  }
  if (run.query_emb.empty())
    throw std::invalid_argument("build_retrieval_run: dataset has no query records");
  if (run.gallery_emb.empty())
    throw std::invalid_argument("build_retrieval_run: dataset has no gallery records");
  return run;
}

}  // namespace xreid
