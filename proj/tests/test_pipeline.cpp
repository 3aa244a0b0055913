// End-to-end training loop: logs, checkpoints, determinism, numeric guards,
// and the query/gallery embedding pass.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "xreid/trainer.hpp"

using namespace xreid;
namespace fs = std::filesystem;

namespace {

RunConfig pipeline_config() {
  RunConfig cfg = testutil::tiny_config();
  cfg.data_ids = 4;
  cfg.epochs = 6;
  return cfg;
}

Dataset make_dataset(const RunConfig& cfg, const fs::path& dir) {
  SynthConfig s;
  s.n_ids = cfg.data_ids;
  s.per_id = cfg.data_per_id;
  s.latent_dim = cfg.data_latent_dim;
  s.noise_sigma = cfg.data_noise_sigma;
  s.img_h = cfg.img_h;
  s.img_w = cfg.img_w;
  s.seed = cfg.seed;
  generate_dataset(s, dir.string());
  Dataset ds = load_manifest((dir / "manifest.csv").string());
  load_pixels(ds);
  return ds;
}

std::vector<std::string> file_lines(const fs::path& p) {
  std::ifstream is(p);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) lines.push_back(line);
  return lines;
}

std::string read_file(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("training writes finite logs, checkpoints, and loses ground over epochs") {
  const auto dir = testutil::make_temp_dir("pipeline_train");
  const RunConfig cfg = pipeline_config();
  const Dataset ds = make_dataset(cfg, dir / "data");
  Model<float> model = Model<float>::init(cfg, cfg.data_ids, cfg.seed);

  const auto before = model.snapshot();
  const std::string out = (dir / "out").string();
  const TrainOutput result = train_model(model, ds, out);

  REQUIRE_EQ(result.logs.size(), 6u);
  CHECK_EQ(result.class_to_identity, std::vector<int>({1, 2, 3, 4}));
  for (const auto& row : result.logs) {
    CHECK(std::isfinite(row.total_loss));
    CHECK(std::isfinite(row.id_loss));
    CHECK(std::isfinite(row.center_loss));
    CHECK_GE(row.intra_class_dist, 0.0);
    CHECK_EQ(row.lr, lr_at_epoch({cfg.lr0, cfg.momentum, cfg.weight_decay, cfg.decay_every,
                                  cfg.decay_factor},
                                 row.epoch));
  }
  // Optimization really ran: the trained weights differ from the snapshot.
  // (Retrieval quality on the full-size configuration is the acceptance
  // gate's job; this suite checks the mechanics.)
  const auto after = model.snapshot();
  REQUIRE_EQ(before.size(), after.size());
  bool any_moved = false;
  for (size_t i = 0; i < before.size(); ++i)
    if (before[i].second.data != after[i].second.data) any_moved = true;
  CHECK(any_moved);

  const auto log_lines = file_lines(fs::path(out) / "train_log.csv");
  REQUIRE_EQ(log_lines.size(), 7u);  // header + one row per epoch
  CHECK_EQ(log_lines[0], "epoch,id_loss,center_loss,total_loss,lr,intra_class_dist");
  CHECK_EQ(log_lines[1].substr(0, 2), "0,");

  const auto timing_lines = file_lines(fs::path(out) / "timing.csv");
  REQUIRE_EQ(timing_lines.size(), 7u);
  CHECK_EQ(timing_lines[0], "epoch,wall_s");

  CHECK(fs::exists(fs::path(out) / "checkpoint_init" / "manifest.txt"));
  for (int e = 1; e <= 6; ++e) {
    char name[40];
    std::snprintf(name, sizeof(name), "checkpoint_epoch_%03d", e);
    CHECK(fs::exists(fs::path(out) / name / "manifest.txt"));
  }
  CHECK(fs::exists(fs::path(out) / "checkpoint_final" / "config.txt"));

  SUBCASE("the final checkpoint reproduces the trained embeddings bit for bit") {
    const Model<float> back = model_from_checkpoint((fs::path(out) / "checkpoint_final").string());
    const RetrievalRun a = build_retrieval_run(model, ds);
    const RetrievalRun b = build_retrieval_run(back, ds);
    REQUIRE_EQ(a.query_emb.size(), b.query_emb.size());
    for (size_t i = 0; i < a.query_emb.size(); ++i) CHECK_EQ(a.query_emb[i], b.query_emb[i]);
    for (size_t i = 0; i < a.gallery_emb.size(); ++i)
      CHECK_EQ(a.gallery_emb[i], b.gallery_emb[i]);
  }
}

TEST_CASE("zero epochs still snapshots the initial model and writes headers") {
  const auto dir = testutil::make_temp_dir("pipeline_zero");
  RunConfig cfg = pipeline_config();
  cfg.epochs = 0;
  const Dataset ds = make_dataset(cfg, dir / "data");
  Model<float> model = Model<float>::init(cfg, cfg.data_ids, cfg.seed);

  const std::string out = (dir / "out").string();
  const TrainOutput result = train_model(model, ds, out);
  CHECK(result.logs.empty());
  CHECK(fs::exists(fs::path(out) / "checkpoint_init" / "manifest.txt"));
  CHECK_FALSE(fs::exists(fs::path(out) / "checkpoint_final"));
  const auto log_lines = file_lines(fs::path(out) / "train_log.csv");
  REQUIRE_EQ(log_lines.size(), 1u);
  CHECK_EQ(log_lines[0], "epoch,id_loss,center_loss,total_loss,lr,intra_class_dist");
}

TEST_CASE("identical configuration and seed reproduce the run byte for byte") {
  const auto dir = testutil::make_temp_dir("pipeline_det");
  RunConfig cfg = pipeline_config();
  cfg.epochs = 3;
  const Dataset ds = make_dataset(cfg, dir / "data");

  auto run_in = [&](const std::string& out) {
    Model<float> model = Model<float>::init(cfg, cfg.data_ids, cfg.seed);
    train_model(model, ds, out);
  };
  run_in((dir / "a").string());
  run_in((dir / "b").string());

  CHECK_EQ(read_file(dir / "a" / "train_log.csv"), read_file(dir / "b" / "train_log.csv"));
  // Final checkpoints carry identical bytes, parameter file by parameter file.
  const auto manifest_a = file_lines(dir / "a" / "checkpoint_final" / "manifest.txt");
  CHECK_EQ(manifest_a, file_lines(dir / "b" / "checkpoint_final" / "manifest.txt"));
  for (const auto& line : manifest_a) {
    const auto fname = line.substr(line.find(' ') + 1);
    CHECK_EQ(read_file(dir / "a" / "checkpoint_final" / fname),
             read_file(dir / "b" / "checkpoint_final" / fname));
  }
}

TEST_CASE("an absurd learning rate fails loudly instead of training on garbage") {
  const auto dir = testutil::make_temp_dir("pipeline_blowup");
  RunConfig cfg = pipeline_config();
  cfg.lr0 = 1e12;
  cfg.epochs = 3;
  const Dataset ds = make_dataset(cfg, dir / "data");
  Model<float> model = Model<float>::init(cfg, cfg.data_ids, cfg.seed);
  CHECK_THROWS_WITH_AS(train_model(model, ds, (dir / "out").string()),
                       doctest::Contains("non-finite"), NumericError);
}

TEST_CASE("the model's class count must match the training identities") {
  const auto dir = testutil::make_temp_dir("pipeline_classes");
  const RunConfig cfg = pipeline_config();
  const Dataset ds = make_dataset(cfg, dir / "data");
  Model<float> model = Model<float>::init(cfg, cfg.data_ids - 1, cfg.seed);
  CHECK_THROWS_WITH_AS(train_model(model, ds, ""),
                       doctest::Contains("model built for 3 classes"), std::invalid_argument);
}

TEST_CASE("the retrieval pass embeds exactly the held-out splits") {
  const auto dir = testutil::make_temp_dir("pipeline_run");
  const RunConfig cfg = pipeline_config();
  const Dataset ds = make_dataset(cfg, dir / "data");
  const Model<float> model = Model<float>::init(cfg, cfg.data_ids, cfg.seed);

  const RetrievalRun run = build_retrieval_run(model, ds);
  // per_id = 4 holds out one image per identity per modality.
  CHECK_EQ(run.query_emb.size(), 4u);
  CHECK_EQ(run.gallery_emb.size(), 4u);
  for (size_t i = 0; i < run.query_emb.size(); ++i)
    CHECK_EQ(run.query_emb[i].size(), static_cast<size_t>(cfg.embed_dim));
  for (int cam : run.query_cam) CHECK((cam == 5 || cam == 6));
  // An untrained model still produces a valid evaluation.
  const EvalResult r = evaluate(run, SearchMode::kAll, ShotMode::kMulti, 1, 0);
  CHECK_GE(r.r1, 0.0);
  CHECK_LE(r.r1, 1.0);
  CHECK_GT(r.mean_ap, 0.0);

  SUBCASE("a dataset without queries cannot be evaluated") {
    Dataset no_query;
    no_query.root = ".";
    Record train_rec;
    train_rec.image_id = "t";
    train_rec.identity = 1;
    train_rec.modality = Modality::kRgb;
    train_rec.camera = 1;
    train_rec.split = Split::kTrain;
    Record gal_rec = train_rec;
    gal_rec.image_id = "g";
    gal_rec.camera = 3;
    gal_rec.split = Split::kGallery;
    no_query.records = {train_rec, gal_rec};
    no_query.pixels = {{}, std::vector<float>(static_cast<size_t>(cfg.img_h) * cfg.img_w * 3, 0.1f)};
    CHECK_THROWS_WITH_AS(build_retrieval_run(model, no_query),
                         doctest::Contains("no query records"), std::invalid_argument);
  }
}

TEST_CASE("batch graphs demand aligned images, modalities, and labels") {
  const RunConfig cfg = testutil::tiny_config();
  const Model<float> model = Model<float>::init(cfg, 3, 1);
  const std::vector<float> rgb(static_cast<size_t>(cfg.img_h) * cfg.img_w * 3, 0.1f);
  CHECK_THROWS_WITH_AS(model.batch_loss({}, {}, {}), doctest::Contains("must align"),
                       std::invalid_argument);
  CHECK_THROWS_AS(model.batch_loss({&rgb}, {Modality::kRgb, Modality::kIr}, {0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(model.batch_loss({&rgb}, {Modality::kRgb}, {0, 1}), std::invalid_argument);
}
