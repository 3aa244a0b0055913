#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "xreid/config.hpp"
#include "xreid/ops.hpp"
#include "xreid/rng.hpp"
#include "xreid/tensor.hpp"

namespace xreid {

namespace detail {

template <class T>
inline void check_labels(const std::vector<int>& labels, int n_rows, int n_classes,
                         const char* op) {
  if (static_cast<int>(labels.size()) != n_rows)
    throw std::invalid_argument(std::string(op) + ": got " + std::to_string(labels.size()) +
                                " labels for " + std::to_string(n_rows) + " rows");
  for (size_t i = 0; i < labels.size(); ++i)
    if (labels[i] < 0 || labels[i] >= n_classes)
      throw std::invalid_argument(std::string(op) + ": label " + std::to_string(labels[i]) +
                                  " at row " + std::to_string(i) + " outside [0," +
                                  std::to_string(n_classes) + ")");
}

}  // namespace detail

// Mean cross-entropy over logit rows, computed via max-subtracted
// log-sum-exp so large logits stay finite.
template <class T>
Tensor<T> identity_loss(const Tensor<T>& logits, const std::vector<int>& labels) {
  detail::expect_rank(logits, 2, "identity_loss");
  const int n = logits.shape()[0], C = logits.shape()[1];
  detail::check_labels<T>(labels, n, C, "identity_loss");
  const auto& lv = logits.value();
  std::vector<T> probs(static_cast<size_t>(n) * C);
  T total = T(0);
  for (int i = 0; i < n; ++i) {
    const T* row = lv.data() + static_cast<size_t>(i) * C;
    T m = row[0];
    for (int j = 1; j < C; ++j) m = std::max(m, row[j]);
    T z = T(0);
    for (int j = 0; j < C; ++j) z += std::exp(row[j] - m);
    const T log_z = m + std::log(z);
    total += log_z - row[labels[static_cast<size_t>(i)]];
    T* prow = probs.data() + static_cast<size_t>(i) * C;
    for (int j = 0; j < C; ++j) prow[j] = std::exp(row[j] - log_z);
  }
  const T value = total / static_cast<T>(n);
  return Tensor<T>::make_op({1}, {value}, {logits},
                            [n, C, labels, probs = std::move(probs)](Node<T>& self) {
    Node<T>* p = self.parents[0].get();
    if (!p->requires_grad) return;
    const T g = self.grad[0] / static_cast<T>(n);
    for (int i = 0; i < n; ++i) {
      const size_t off = static_cast<size_t>(i) * C;
      for (int j = 0; j < C; ++j) {
        T d = probs[off + j];
        if (j == labels[static_cast<size_t>(i)]) d -= T(1);
        p->grad[off + j] += g * d;
      }
    }
  });
}

// Center pull-in penalty over a batch of embeddings (n x d) against per-class
// centers (C x d). Variants:
//   plain  : 0.5 * sum_i ||x_i - c_{y_i}||^2
//   margin : 0.5 * sum_i max(||x_i - c_{y_i}||^2 - m, 0)
//   exp    : exp(min(S, clamp)) - 1 with S the margin form; the whole batch
//            sum sits inside one exponential, and when S exceeds the clamp the
//            gradient uses the slope at the clamp point (exp(clamp)).
// The hinge contributes zero gradient exactly at its kink.
template <class T>
Tensor<T> center_penalty(const Tensor<T>& embeddings, const Tensor<T>& centers,
                         const std::vector<int>& labels, CenterVariant variant, T margin,
                         T exponent_clamp) {
  detail::expect_rank(embeddings, 2, "center_penalty");
  detail::expect_rank(centers, 2, "center_penalty");
  const int n = embeddings.shape()[0], d = embeddings.shape()[1];
  const int C = centers.shape()[0];
  if (centers.shape()[1] != d)
    throw std::invalid_argument("center_penalty: embedding dim " + std::to_string(d) +
                                " does not match centers " + shape_str(centers.shape()));
  detail::check_labels<T>(labels, n, C, "center_penalty");
  if (variant == CenterVariant::kNone)
    throw std::invalid_argument("center_penalty: variant 'none' has no penalty term");
  if (margin < T(0)) throw std::invalid_argument("center_penalty: margin must be >= 0");

  const auto& xv = embeddings.value();
  const auto& cv = centers.value();
  std::vector<char> active(static_cast<size_t>(n), 0);
  T s = T(0);
  for (int i = 0; i < n; ++i) {
    const T* x = xv.data() + static_cast<size_t>(i) * d;
    const T* c = cv.data() + static_cast<size_t>(labels[static_cast<size_t>(i)]) * d;
    T dist2 = T(0);
    for (int j = 0; j < d; ++j) {
      const T diff = x[j] - c[j];
      dist2 += diff * diff;
    }
    if (variant == CenterVariant::kPlain) {
      active[static_cast<size_t>(i)] = 1;
      s += dist2;
    } else if (dist2 - margin > T(0)) {
      active[static_cast<size_t>(i)] = 1;
      s += dist2 - margin;
    }
  }
  s *= T(0.5);

  T value, chain;
  if (variant == CenterVariant::kExp) {
    const T e = std::exp(std::min(s, exponent_clamp));
    value = e - T(1);
    chain = e;  // straight-through slope at the clamp point
  } else {
    value = s;
    chain = T(1);
  }

  return Tensor<T>::make_op(
      {1}, {value}, {embeddings, centers},
      [n, d, labels, chain, active = std::move(active)](Node<T>& self) {
        Node<T>* px = self.parents[0].get();
        Node<T>* pc = self.parents[1].get();
        const T g = self.grad[0] * chain;
        for (int i = 0; i < n; ++i) {
          if (!active[static_cast<size_t>(i)]) continue;
          const size_t xoff = static_cast<size_t>(i) * d;
          const size_t coff = static_cast<size_t>(labels[static_cast<size_t>(i)]) * d;
          for (int j = 0; j < d; ++j) {
            const T diff = px->value[xoff + j] - pc->value[coff + j];
            if (px->requires_grad) px->grad[xoff + j] += g * diff;
            if (pc->requires_grad) pc->grad[coff + j] -= g * diff;
          }
        }
      });
}

// The full exponential form used by default training.
template <class T>
Tensor<T> mecen_loss(const Tensor<T>& embeddings, const Tensor<T>& centers,
                     const std::vector<int>& labels, T margin, T exponent_clamp) {
  return center_penalty(embeddings, centers, labels, CenterVariant::kExp, margin, exponent_clamp);
}

// L = L_id + lambda * L_center. With lambda == 0 (or variant none) the center
// term is not even built, so centers stay off the graph.
template <class T>
Tensor<T> joint_loss(const Tensor<T>& id_term, const Tensor<T>& center_term, T lambda) {
  if (!center_term.defined() || lambda == T(0)) return id_term;
  return add(id_term, scale(center_term, lambda));
}

// Projects every center row back onto the unit sphere (applied after each
// optimizer step so the norm constraint holds throughout training).
template <class T>
void renormalize_centers(Tensor<T>& centers) {
  detail::expect_rank(centers, 2, "renormalize_centers");
  const int C = centers.shape()[0], d = centers.shape()[1];
  auto& v = centers.leaf_value();
  for (int i = 0; i < C; ++i) {
    T* row = v.data() + static_cast<size_t>(i) * d;
    T norm2 = T(0);
    for (int j = 0; j < d; ++j) norm2 += row[j] * row[j];
    const T norm = std::sqrt(norm2);
    if (!(norm > T(0)) || !std::isfinite(static_cast<double>(norm)))
      throw NumericError("renormalize_centers: degenerate center row " + std::to_string(i));
    for (int j = 0; j < d; ++j) row[j] /= norm;
  }
}

// Seeded random unit vectors, one per identity.
template <class T>
Tensor<T> init_centers(int n_classes, int dim, uint64_t seed) {
  if (n_classes <= 0 || dim <= 0)
    throw std::invalid_argument("init_centers: class count and dim must be positive");
  Rng rng(seed);
  std::vector<T> data(static_cast<size_t>(n_classes) * dim);
  for (auto& v : data) v = static_cast<T>(rng.normal());
  auto centers = Tensor<T>::parameter({n_classes, dim}, std::move(data));
  renormalize_centers(centers);
  return centers;
}

}  // namespace xreid
