#pragma once

#include <string>

#include "xreid/config.hpp"
#include "xreid/cascade.hpp"
#include "xreid/ops.hpp"
#include "xreid/rng.hpp"
#include "xreid/tensor.hpp"

namespace xreid {

enum class Modality { kRgb, kIr };

inline std::string modality_name(Modality m) { return m == Modality::kRgb ? "rgb" : "ir"; }

// Two-branch toy CNN: one 3x3 stem per modality (3-channel rgb, 1-channel ir)
// followed by a trunk of three shared 3x3 blocks at strides 2, 2, 1. Every
// conv is followed by ReLU; there is no normalization anywhere. The trunk is
// literally the same tensors on both paths, which is what makes the branches
// share weights.
//
// Convs and the embedding projection carry no bias, following the usual
// convention for conv backbones. This also keeps the untrained network
// scale-linear in its input, so small input pixels give small embeddings and
// the batch exponent of the center term starts in its stable range; a bias
// term here picks up a coherent whole-batch gradient from that exponent and
// destabilizes early training.
template <class T>
struct EncoderParams {
  Tensor<T> stem_rgb_w;
  Tensor<T> stem_ir_w;
  Tensor<T> trunk1_w;
  Tensor<T> trunk2_w;
  Tensor<T> trunk3_w;
  Tensor<T> embed_w;  // pooled map -> shared embedding space
};

template <class T>
EncoderParams<T> init_encoder(const RunConfig& cfg, Rng& rng) {
  const int S = cfg.stem_channels, Tc = cfg.trunk_channels, D = cfg.out_d, E = cfg.embed_dim;
  auto conv_init = [&](int kh, int kw, int cin, int cout) {
    return Tensor<T>::parameter({kh, kw, cin, cout},
                                detail::uniform_fan_in<T>(rng, int64_t(kh) * kw * cin * cout,
                                                          kh * kw * cin));
  };
  EncoderParams<T> p;
  p.stem_rgb_w = conv_init(3, 3, 3, S);
  p.stem_ir_w = conv_init(3, 3, 1, S);
  p.trunk1_w = conv_init(3, 3, S, Tc);
  p.trunk2_w = conv_init(3, 3, Tc, Tc);
  p.trunk3_w = conv_init(3, 3, Tc, D);
  p.embed_w = Tensor<T>::parameter({D, E}, detail::uniform_fan_in<T>(rng, int64_t(D) * E, D));
  return p;
}

// image -> backbone feature map (out_h x out_w x out_d).
template <class T>
Tensor<T> encode(const Tensor<T>& image, Modality modality, const EncoderParams<T>& p,
                 const RunConfig& cfg) {
  detail::expect_rank(image, 3, "encode");
  const int want_c = modality == Modality::kRgb ? 3 : 1;
  if (image.shape()[0] != cfg.img_h || image.shape()[1] != cfg.img_w ||
      image.shape()[2] != want_c)
    throw std::invalid_argument("encode: " + modality_name(modality) + " image must be [" +
                                std::to_string(cfg.img_h) + "," + std::to_string(cfg.img_w) + "," +
                                std::to_string(want_c) + "], got " + shape_str(image.shape()));
  const Tensor<T>& sw = modality == Modality::kRgb ? p.stem_rgb_w : p.stem_ir_w;
  Tensor<T> h = relu(conv2d_nobias(image, sw, Padding::kSame, 1));
  h = relu(conv2d_nobias(h, p.trunk1_w, Padding::kSame, 2));
  h = relu(conv2d_nobias(h, p.trunk2_w, Padding::kSame, 2));
  h = relu(conv2d_nobias(h, p.trunk3_w, Padding::kSame, 1));
  return h;
}

// feature map -> d-dimensional embedding (spatial average pool, then a dense
// projection; no activation, no normalization).
template <class T>
Tensor<T> embed(const Tensor<T>& feature_map, const EncoderParams<T>& p) {
  detail::expect_rank(feature_map, 3, "embed");
  const int D = feature_map.shape()[2];
  Tensor<T> pooled = reshape(pool_spatial(feature_map, PoolMode::kAvg), {D});
  return dense_nobias(pooled, p.embed_w);
}

}  // namespace xreid
