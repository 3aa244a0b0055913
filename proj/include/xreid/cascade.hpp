#pragma once

#include <string>
#include <vector>

#include "xreid/config.hpp"
#include "xreid/ops.hpp"
#include "xreid/rng.hpp"
#include "xreid/tensor.hpp"

namespace xreid {

// Attention behaviour toggles (the ablation axes flip these).
struct AttentionSettings {
  int reduction = 4;
  int spatial_kernel = 3;
  bool use_channel = true;
  bool use_spatial = true;
  ChannelPool channel_pool = ChannelPool::kAvgMax;

  static AttentionSettings from(const RunConfig& cfg) {
    AttentionSettings s;
    s.reduction = cfg.reduction;
    s.spatial_kernel = cfg.spatial_kernel;
    s.use_channel = cfg.use_channel_gate;
    s.use_spatial = cfg.use_spatial_gate;
    s.channel_pool = cfg.channel_pool;
    return s;
  }
};

// Learnable state of one aggregation stage. All parts within a stage share
// these tensors; stages own distinct copies. proj_w is a bias-free 1x1
// projection in front of the gates, so zeroing a stage's parameters turns its
// whole attention branch off and the residual passes features through
// unchanged.
template <class T>
struct AttentionStageParams {
  Tensor<T> proj_w;  // {1,1,D,D}
  Tensor<T> mlp1_w;  // {D, D/r}
  Tensor<T> mlp1_b;  // {D/r}
  Tensor<T> mlp2_w;  // {D/r, D}
  Tensor<T> mlp2_b;  // {D}
  Tensor<T> sp_w;    // {k,k,2,1}
  Tensor<T> sp_b;    // {1}
};

namespace detail {

template <class T>
std::vector<T> uniform_fan_in(Rng& rng, int64_t count, int fan_in) {
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  std::vector<T> v(static_cast<size_t>(count));
  for (auto& x : v) x = static_cast<T>(rng.uniform(-bound, bound));
  return v;
}

}  // namespace detail

template <class T>
AttentionStageParams<T> init_attention_stage(int D, const AttentionSettings& s, Rng& rng) {
  if (D % s.reduction != 0)
    throw std::invalid_argument("attention: channel count " + std::to_string(D) +
                                " not divisible by reduction " + std::to_string(s.reduction));
  const int hidden = D / s.reduction;
  const int k = s.spatial_kernel;
  const auto zeros = [](int count) {
    return Tensor<T>::parameter({count}, std::vector<T>(static_cast<size_t>(count), T(0)));
  };
  AttentionStageParams<T> p;
  p.proj_w = Tensor<T>::parameter({1, 1, D, D}, detail::uniform_fan_in<T>(rng, int64_t(D) * D, D));
  p.mlp1_w = Tensor<T>::parameter({D, hidden}, detail::uniform_fan_in<T>(rng, int64_t(D) * hidden, D));
  p.mlp1_b = zeros(hidden);
  p.mlp2_w = Tensor<T>::parameter({hidden, D}, detail::uniform_fan_in<T>(rng, int64_t(hidden) * D, hidden));
  p.mlp2_b = zeros(D);
  p.sp_w = Tensor<T>::parameter({k, k, 2, 1}, detail::uniform_fan_in<T>(rng, int64_t(k) * k * 2, k * k * 2));
  p.sp_b = zeros(1);
  return p;
}

// Horizontal stripes: p parts of height ceil(H/p), the last taking the
// remainder when p does not divide H.
template <class T>
std::vector<Tensor<T>> partition(const Tensor<T>& x, int p) {
  detail::expect_rank(x, 3, "partition");
  const int H = x.shape()[0];
  if (p < 1) throw std::invalid_argument("partition: part count must be >= 1");
  if (p > H)
    throw std::invalid_argument("partition: part count " + std::to_string(p) +
                                " exceeds height " + std::to_string(H));
  if (p == 1) return {x};
  const int stripe = (H + p - 1) / p;
  std::vector<Tensor<T>> parts;
  parts.reserve(static_cast<size_t>(p));
  for (int j = 0; j < p; ++j) {
    const int y0 = j * stripe;
    const int rows = std::min(stripe, H - y0);
    parts.push_back(slice_height(x, y0, rows));
  }
  return parts;
}

// Channel gate: sigmoid over a shared two-layer MLP applied to the summed
// spatial avg/max descriptors, broadcast back over the grid as 1x1xD.
template <class T>
Tensor<T> channel_gate(const Tensor<T>& x, const AttentionStageParams<T>& p,
                       const AttentionSettings& s) {
  Tensor<T> desc;
  switch (s.channel_pool) {
    case ChannelPool::kAvgMax:
      desc = add(pool_spatial(x, PoolMode::kAvg), pool_spatial(x, PoolMode::kMax));
      break;
    case ChannelPool::kAvgOnly: desc = pool_spatial(x, PoolMode::kAvg); break;
    case ChannelPool::kMaxOnly: desc = pool_spatial(x, PoolMode::kMax); break;
  }
  const int D = x.shape()[2];
  Tensor<T> h = dense(reshape(desc, {D}), p.mlp1_w, p.mlp1_b);
  h = dense(relu(h), p.mlp2_w, p.mlp2_b);
  return reshape(sigmoid(h), {1, 1, D});
}

// Spatial gate: sigmoid of a same-padded conv over the channel avg/max pair,
// broadcast over channels as HxWx1.
template <class T>
Tensor<T> spatial_gate(const Tensor<T>& x, const AttentionStageParams<T>& p) {
  Tensor<T> desc = concat_channel(pool_channel(x, PoolMode::kAvg), pool_channel(x, PoolMode::kMax));
  return sigmoid(conv2d(desc, p.sp_w, p.sp_b, Padding::kSame));
}

// Residual attention refinement: the attention branch projects its input,
// gates it along channels then space, and the result modulates the trunk
// feature multiplicatively around an identity path:
//   att   = proj(x_a);  att' = att * CH(att);  att'' = att' * SP(att')
//   out   = x_o + x_o * att''
// Zero parameters give att == 0, both gates at 1/2 have nothing to gate, and
// the output reduces to x_o exactly.
template <class T>
Tensor<T> enhance(const Tensor<T>& x_att, const Tensor<T>& x_orig,
                  const AttentionStageParams<T>& p, const AttentionSettings& s) {
  if (x_att.shape() != x_orig.shape())
    throw std::invalid_argument("enhance: attention input " + shape_str(x_att.shape()) +
                                " does not match trunk input " + shape_str(x_orig.shape()));
  Tensor<T> att = conv2d_nobias(x_att, p.proj_w, Padding::kSame);
  if (s.use_channel) att = mul(att, channel_gate(att, p, s));
  if (s.use_spatial) att = mul(att, spatial_gate(att, p));
  return add(x_orig, mul(x_orig, att));
}

// Everything the pyramid produces in one pass: the unified map plus each
// stage's enhanced parts (used by part-mode identity heads).
template <class T>
struct CascadeResult {
  Tensor<T> output;                                // same shape as the input map
  std::vector<std::vector<Tensor<T>>> stage_parts; // enhanced parts per stage
  std::vector<Tensor<T>> all_parts;                // flattened, fine to coarse
};

// Fine-to-coarse aggregation. scales lists strictly decreasing part counts;
// stage 0 refines each finest part against itself, and every later stage
// refines the height-concatenation of its consecutive children against the
// original part at that scale. With a trailing scale of 1 the last stage is
// the unification against the full backbone map; without it the output is the
// concatenation of the last stage's parts.
template <class T>
CascadeResult<T> cascade(const Tensor<T>& global_map,
                         const std::vector<int>& scales,
                         const std::vector<AttentionStageParams<T>>& stage_params,
                         const AttentionSettings& settings) {
  detail::expect_rank(global_map, 3, "cascade");
  if (scales.empty()) throw std::invalid_argument("cascade: empty scale list");
  if (stage_params.size() != scales.size())
    throw std::invalid_argument("cascade: got " + std::to_string(stage_params.size()) +
                                " stage parameter sets for " + std::to_string(scales.size()) +
                                " scales");
  const int H = global_map.shape()[0];
  for (size_t m = 0; m < scales.size(); ++m) {
    if (scales[m] < 1) throw std::invalid_argument("cascade: scales must be >= 1");
    if (H % scales[m] != 0)
      throw std::invalid_argument("cascade: height " + std::to_string(H) +
                                  " not divisible by scale " + std::to_string(scales[m]));
    if (m > 0) {
      if (scales[m] >= scales[m - 1])
        throw std::invalid_argument("cascade: scales must strictly decrease toward coarse");
      if (scales[m - 1] % scales[m] != 0)
        throw std::invalid_argument("cascade: scale " + std::to_string(scales[m - 1]) +
                                    " is not a multiple of the coarser scale " +
                                    std::to_string(scales[m]));
    }
  }

  CascadeResult<T> res;
  res.stage_parts.resize(scales.size());

  // Stage 0: refine each finest part against itself.
  std::vector<Tensor<T>> parts0 = partition(global_map, scales[0]);
  for (auto& part : parts0)
    res.stage_parts[0].push_back(enhance(part, part, stage_params[0], settings));

  // Later stages: group consecutive children, concat, refine against the
  // original part at the coarser scale.
  for (size_t m = 1; m < scales.size(); ++m) {
    const int group = scales[m - 1] / scales[m];
    std::vector<Tensor<T>> originals = partition(global_map, scales[m]);
    for (int j = 0; j < scales[m]; ++j) {
      std::vector<Tensor<T>> children(res.stage_parts[m - 1].begin() + j * group,
                                      res.stage_parts[m - 1].begin() + (j + 1) * group);
      Tensor<T> cat = concat_height(children);
      res.stage_parts[m].push_back(enhance(cat, originals[static_cast<size_t>(j)],
                                           stage_params[m], settings));
    }
  }

  const auto& last = res.stage_parts.back();
  res.output = last.size() == 1 ? last[0] : concat_height(last);
  for (const auto& stage : res.stage_parts)
    for (const auto& part : stage) res.all_parts.push_back(part);
  return res;
}

}  // namespace xreid
