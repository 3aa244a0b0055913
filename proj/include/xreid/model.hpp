#pragma once

#include <string>
#include <utility>
#include <vector>

#include "xreid/cascade.hpp"
#include "xreid/config.hpp"
#include "xreid/data.hpp"
#include "xreid/encoder.hpp"
#include "xreid/losses.hpp"
#include "xreid/mspd.hpp"
#include "xreid/ops.hpp"

namespace xreid {

// The whole trainable system: two-branch encoder, attention pyramid, identity
// heads, class centers. The named parameter list is built in one fixed order,
// which pins init draws, optimizer state layout, and checkpoint contents.
template <class T>
struct Model {
  RunConfig cfg;
  int n_classes = 0;
  EncoderParams<T> enc;
  std::vector<AttentionStageParams<T>> stages;
  Tensor<T> head_w, head_b;                                // global id head
  std::vector<std::pair<Tensor<T>, Tensor<T>>> part_heads; // one per pyramid part
  Tensor<T> centers;
  std::vector<std::pair<std::string, Tensor<T>>> params;

  int n_parts() const {
    int n = 0;
    for (int s : cfg.scales) n += s;
    return n;
  }

  static Model init(const RunConfig& cfg, int n_classes, uint64_t seed) {
    cfg.validate();
    if (n_classes <= 0) throw std::invalid_argument("Model: class count must be positive");
    Model m;
    m.cfg = cfg;
    m.n_classes = n_classes;
    Rng rng(seed);
    const AttentionSettings att = AttentionSettings::from(cfg);

    m.enc = init_encoder<T>(cfg, rng);
    m.params = {
        {"stem_rgb.w", m.enc.stem_rgb_w}, {"stem_ir.w", m.enc.stem_ir_w},
        {"trunk1.w", m.enc.trunk1_w},     {"trunk2.w", m.enc.trunk2_w},
        {"trunk3.w", m.enc.trunk3_w},     {"embed.w", m.enc.embed_w},
    };
    for (size_t s = 0; s < cfg.scales.size(); ++s) {
      auto stage = init_attention_stage<T>(cfg.out_d, att, rng);
      const std::string pre = "attn" + std::to_string(s) + ".";
      m.params.emplace_back(pre + "proj.w", stage.proj_w);
      m.params.emplace_back(pre + "mlp1.w", stage.mlp1_w);
      m.params.emplace_back(pre + "mlp1.b", stage.mlp1_b);
      m.params.emplace_back(pre + "mlp2.w", stage.mlp2_w);
      m.params.emplace_back(pre + "mlp2.b", stage.mlp2_b);
      m.params.emplace_back(pre + "spatial.w", stage.sp_w);
      m.params.emplace_back(pre + "spatial.b", stage.sp_b);
      m.stages.push_back(std::move(stage));
    }
    const auto zero_bias = [](int count) {
      return Tensor<T>::parameter({count}, std::vector<T>(static_cast<size_t>(count), T(0)));
    };
    if (cfg.id_mode == IdMode::kGlobal) {
      m.head_w = Tensor<T>::parameter(
          {cfg.embed_dim, n_classes},
          detail::uniform_fan_in<T>(rng, int64_t(cfg.embed_dim) * n_classes, cfg.embed_dim));
      m.head_b = zero_bias(n_classes);
      m.params.emplace_back("head.w", m.head_w);
      m.params.emplace_back("head.b", m.head_b);
    } else {
      for (int p = 0; p < m.n_parts(); ++p) {
        auto w = Tensor<T>::parameter(
            {cfg.out_d, n_classes},
            detail::uniform_fan_in<T>(rng, int64_t(cfg.out_d) * n_classes, cfg.out_d));
        auto b = zero_bias(n_classes);
        const std::string pre = "part_head" + std::to_string(p) + ".";
        m.params.emplace_back(pre + "w", w);
        m.params.emplace_back(pre + "b", b);
        m.part_heads.emplace_back(std::move(w), std::move(b));
      }
    }
    m.centers = init_centers<T>(n_classes, cfg.embed_dim, seed + 1);
    m.params.emplace_back("centers", m.centers);
    return m;
  }

  struct Forward {
    Tensor<T> embedding;
    std::vector<Tensor<T>> part_vectors;  // pooled enhanced parts (part mode only)
  };

  Forward forward(const Tensor<T>& image, Modality modality, bool want_parts) const {
    Forward f;
    const Tensor<T> feat = encode(image, modality, enc, cfg);
    const CascadeResult<T> casc =
        cascade(feat, cfg.scales, stages, AttentionSettings::from(cfg));
    f.embedding = embed(casc.output, enc);
    if (want_parts) {
      f.part_vectors.reserve(casc.all_parts.size());
      for (const auto& part : casc.all_parts)
        f.part_vectors.push_back(reshape(pool_spatial(part, PoolMode::kAvg), {cfg.out_d}));
    }
    return f;
  }

  Tensor<T> image_tensor(const std::vector<float>& pixels, Modality modality) const {
    const int c = modality == Modality::kRgb ? 3 : 1;
    std::vector<T> data(pixels.size());
    for (size_t i = 0; i < pixels.size(); ++i) data[i] = static_cast<T>(pixels[i]);
    return Tensor<T>::constant({cfg.img_h, cfg.img_w, c}, std::move(data));
  }

  struct BatchLoss {
    Tensor<T> total;
    double id_value = 0;
    double center_value = 0;
    std::vector<std::vector<T>> embeddings;  // detached copies, for logging
  };

  // Builds the full training graph for one batch. labels are 0-based class
  // indices parallel to the images.
  BatchLoss batch_loss(const std::vector<const std::vector<float>*>& images,
                       const std::vector<Modality>& modalities,
                       const std::vector<int>& labels) const {
    if (images.empty() || images.size() != modalities.size() || images.size() != labels.size())
      throw std::invalid_argument("batch_loss: images, modalities and labels must align");
    const bool part_mode = cfg.id_mode == IdMode::kPart;
    const int n = static_cast<int>(images.size());

    std::vector<Tensor<T>> embs;
    std::vector<std::vector<Tensor<T>>> parts;  // [sample][part]
    embs.reserve(images.size());
    for (int i = 0; i < n; ++i) {
      const Forward f =
          forward(image_tensor(*images[static_cast<size_t>(i)], modalities[static_cast<size_t>(i)]),
                  modalities[static_cast<size_t>(i)], part_mode);
      embs.push_back(f.embedding);
      if (part_mode) parts.push_back(f.part_vectors);
    }
    const Tensor<T> emb_matrix = stack_rows(embs);

    Tensor<T> id_term;
    if (!part_mode) {
      std::vector<Tensor<T>> logit_rows;
      logit_rows.reserve(embs.size());
      for (const auto& e : embs) logit_rows.push_back(dense(e, head_w, head_b));
      id_term = identity_loss(stack_rows(logit_rows), labels);
    } else {
      const int np = n_parts();
      Tensor<T> acc;
      for (int p = 0; p < np; ++p) {
        std::vector<Tensor<T>> logit_rows;
        logit_rows.reserve(parts.size());
        for (int i = 0; i < n; ++i)
          logit_rows.push_back(dense(parts[static_cast<size_t>(i)][static_cast<size_t>(p)],
                                     part_heads[static_cast<size_t>(p)].first,
                                     part_heads[static_cast<size_t>(p)].second));
        const Tensor<T> ce = identity_loss(stack_rows(logit_rows), labels);
        acc = acc.defined() ? add(acc, ce) : ce;
      }
      id_term = scale(acc, T(1) / static_cast<T>(np));
    }

    BatchLoss out;
    out.id_value = static_cast<double>(id_term.scalar());
    Tensor<T> center_term;
    if (cfg.center_variant != CenterVariant::kNone && cfg.lambda != 0.0) {
      center_term = center_penalty(emb_matrix, centers, labels, cfg.center_variant,
                                   static_cast<T>(cfg.margin), static_cast<T>(cfg.exponent_clamp));
      out.center_value = static_cast<double>(center_term.scalar());
    }
    out.total = joint_loss(id_term, center_term, static_cast<T>(cfg.lambda));

    out.embeddings.reserve(embs.size());
    const auto& mat = emb_matrix.value();
    for (int i = 0; i < n; ++i)
      out.embeddings.emplace_back(mat.begin() + static_cast<size_t>(i) * cfg.embed_dim,
                                  mat.begin() + static_cast<size_t>(i + 1) * cfg.embed_dim);
    return out;
  }

  void zero_grads() {
    for (auto& [name, p] : params) p.clear_grad();
  }

  std::vector<std::pair<std::string, HostTensor>> snapshot() const {
    std::vector<std::pair<std::string, HostTensor>> out;
    out.reserve(params.size());
    for (const auto& [name, p] : params) {
      HostTensor h;
      h.shape = p.shape();
      h.data.resize(p.value().size());
      for (size_t i = 0; i < h.data.size(); ++i) h.data[i] = static_cast<float>(p.value()[i]);
      out.emplace_back(name, std::move(h));
    }
    return out;
  }

  void restore(const std::vector<std::pair<std::string, HostTensor>>& saved) {
    if (saved.size() != params.size())
      throw IoError("Model::restore: checkpoint has " + std::to_string(saved.size()) +
                    " tensors, model has " + std::to_string(params.size()));
    for (size_t k = 0; k < params.size(); ++k) {
      const auto& [want_name, p] = params[k];
      const auto& [got_name, h] = saved[k];
      if (got_name != want_name)
        throw IoError("Model::restore: expected parameter '" + want_name + "', found '" +
                      got_name + "'");
      if (h.shape != p.shape())
        throw IoError("Model::restore: shape mismatch for '" + want_name + "': checkpoint " +
                      shape_str(h.shape) + " vs model " + shape_str(p.shape()));
      auto& buf = params[k].second.leaf_value();
      for (size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<T>(h.data[i]);
    }
  }
};

}  // namespace xreid
