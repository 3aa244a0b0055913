#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "xreid/tensor.hpp"

namespace xreid {

enum class Padding { kSame, kValid };
enum class PoolMode { kAvg, kMax };

namespace detail {

template <class T>
inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

template <class T>
inline void expect_rank(const Tensor<T>& t, size_t rank, const char* op) {
  if (t.shape().size() != rank)
    throw std::invalid_argument(std::string(op) + ": expected rank " + std::to_string(rank) +
                                " tensor, got shape " + shape_str(t.shape()));
}

}  // namespace detail

// ---- pointwise ops ----

template <class T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  const auto& xv = x.value();
  std::vector<T> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) {
    const T v = xv[i];
    // Branch on sign so the exp argument is always non-positive.
    if (v >= T(0)) {
      out[i] = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      out[i] = e / (T(1) + e);
    }
  }
  return Tensor<T>::make_op(x.shape(), std::move(out), {x}, [](Node<T>& self) {
    Node<T>* p = self.parents[0].get();
    if (!p->requires_grad) return;
    for (size_t i = 0; i < self.value.size(); ++i) {
      const T y = self.value[i];
      p->grad[i] += self.grad[i] * y * (T(1) - y);
    }
  });
}

template <class T>
Tensor<T> relu(const Tensor<T>& x) {
  const auto& xv = x.value();
  std::vector<T> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > T(0) ? xv[i] : T(0);
  return Tensor<T>::make_op(x.shape(), std::move(out), {x}, [](Node<T>& self) {
    Node<T>* p = self.parents[0].get();
    if (!p->requires_grad) return;
    // Subgradient 0 at the kink (x == 0).
    for (size_t i = 0; i < self.value.size(); ++i)
      if (p->value[i] > T(0)) p->grad[i] += self.grad[i];
  });
}

template <class T>
Tensor<T> scale(const Tensor<T>& x, T c) {
  const auto& xv = x.value();
  std::vector<T> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) out[i] = c * xv[i];
  return Tensor<T>::make_op(x.shape(), std::move(out), {x}, [c](Node<T>& self) {
    Node<T>* p = self.parents[0].get();
    if (!p->requires_grad) return;
    for (size_t i = 0; i < self.value.size(); ++i) p->grad[i] += c * self.grad[i];
  });
}

namespace detail {

// Broadcast plan for equal-rank shapes: every dim must match or be 1 on one
// side. Strides of broadcast dims collapse to 0.
struct BroadcastPlan {
  Shape out;
  std::vector<int64_t> stride_a, stride_b;
  bool trivial = false;  // shapes equal, flat loop suffices
};

inline BroadcastPlan broadcast_plan(const Shape& a, const Shape& b, const char* op) {
  if (a == b) {
    BroadcastPlan p;
    p.out = a;
    p.trivial = true;
    return p;
  }
  if (a.size() != b.size())
    throw std::invalid_argument(std::string(op) + ": rank mismatch between " + shape_str(a) +
                                " and " + shape_str(b));
  const size_t r = a.size();
  BroadcastPlan p;
  p.out.resize(r);
  for (size_t d = 0; d < r; ++d) {
    if (a[d] == b[d] || a[d] == 1 || b[d] == 1) {
      p.out[d] = std::max(a[d], b[d]);
    } else {
      throw std::invalid_argument(std::string(op) + ": shapes " + shape_str(a) + " and " +
                                  shape_str(b) + " are not broadcast-compatible");
    }
  }
  p.stride_a.assign(r, 0);
  p.stride_b.assign(r, 0);
  int64_t sa = 1, sb = 1;
  for (size_t d = r; d-- > 0;) {
    p.stride_a[d] = (a[d] == 1) ? 0 : sa;
    p.stride_b[d] = (b[d] == 1) ? 0 : sb;
    sa *= a[d];
    sb *= b[d];
  }
  return p;
}

// Maps a flat output index to flat input offsets under the plan.
inline void bcast_offsets(const BroadcastPlan& p, int64_t flat, int64_t* ia, int64_t* ib) {
  int64_t oa = 0, ob = 0;
  for (size_t d = p.out.size(); d-- > 0;) {
    const int64_t c = flat % p.out[d];
    flat /= p.out[d];
    oa += c * p.stride_a[d];
    ob += c * p.stride_b[d];
  }
  *ia = oa;
  *ib = ob;
}

}  // namespace detail

enum class BinaryKind { kAdd, kSub, kMul };

template <class T>
Tensor<T> binary_pointwise(const Tensor<T>& a, const Tensor<T>& b, BinaryKind kind) {
  const char* name = kind == BinaryKind::kAdd ? "add" : (kind == BinaryKind::kSub ? "sub" : "mul");
  auto plan = detail::broadcast_plan(a.shape(), b.shape(), name);
  const auto& av = a.value();
  const auto& bv = b.value();
  const int64_t n = shape_numel(plan.out);
  std::vector<T> out(static_cast<size_t>(n));
  if (plan.trivial) {
    for (int64_t i = 0; i < n; ++i) {
      switch (kind) {
        case BinaryKind::kAdd: out[i] = av[i] + bv[i]; break;
        case BinaryKind::kSub: out[i] = av[i] - bv[i]; break;
        case BinaryKind::kMul: out[i] = av[i] * bv[i]; break;
      }
    }
  } else {
    for (int64_t i = 0; i < n; ++i) {
      int64_t ia, ib;
      detail::bcast_offsets(plan, i, &ia, &ib);
      switch (kind) {
        case BinaryKind::kAdd: out[i] = av[ia] + bv[ib]; break;
        case BinaryKind::kSub: out[i] = av[ia] - bv[ib]; break;
        case BinaryKind::kMul: out[i] = av[ia] * bv[ib]; break;
      }
    }
  }
  return Tensor<T>::make_op(plan.out, std::move(out), {a, b},
                            [plan, kind, n](Node<T>& self) {
    Node<T>* pa = self.parents[0].get();
    Node<T>* pb = self.parents[1].get();
    const bool ga = pa->requires_grad;
    const bool gb = pb->requires_grad;
    for (int64_t i = 0; i < n; ++i) {
      int64_t ia = i, ib = i;
      if (!plan.trivial) detail::bcast_offsets(plan, i, &ia, &ib);
      const T g = self.grad[i];
      switch (kind) {
        case BinaryKind::kAdd:
          if (ga) pa->grad[ia] += g;
          if (gb) pb->grad[ib] += g;
          break;
        case BinaryKind::kSub:
          if (ga) pa->grad[ia] += g;
          if (gb) pb->grad[ib] -= g;
          break;
        case BinaryKind::kMul:
          if (ga) pa->grad[ia] += g * pb->value[ib];
          if (gb) pb->grad[ib] += g * pa->value[ia];
          break;
      }
    }
  });
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_pointwise(a, b, BinaryKind::kAdd);
}
template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_pointwise(a, b, BinaryKind::kSub);
}
template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_pointwise(a, b, BinaryKind::kMul);
}

// ---- convolution ----

// 2D cross-correlation over an HxWxCin map with a Kh x Kw x Cin x Cout kernel.
// Same padding keeps H,W at stride 1 (odd kernels only); valid uses no padding.
// Output extent per axis: floor((H + 2p - K) / stride) + 1.
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, Padding padding,
                 int stride = 1) {
  detail::expect_rank(x, 3, "conv2d");
  detail::expect_rank(w, 4, "conv2d");
  const int H = x.shape()[0], W = x.shape()[1], Cin = x.shape()[2];
  const int Kh = w.shape()[0], Kw = w.shape()[1], WCin = w.shape()[2], Cout = w.shape()[3];
  detail::require(stride >= 1, "conv2d: stride must be >= 1");
  if (WCin != Cin)
    throw std::invalid_argument("conv2d: channel mismatch between input " + shape_str(x.shape()) +
                                " and kernel " + shape_str(w.shape()));
  if (b.defined()) {
    detail::expect_rank(b, 1, "conv2d");
    if (b.shape()[0] != Cout)
      throw std::invalid_argument("conv2d: bias extent " + shape_str(b.shape()) +
                                  " does not match kernel " + shape_str(w.shape()));
  }
  int ph = 0, pw = 0;
  if (padding == Padding::kSame) {
    detail::require(Kh % 2 == 1 && Kw % 2 == 1, "conv2d: same padding requires odd kernel extents");
    ph = (Kh - 1) / 2;
    pw = (Kw - 1) / 2;
  }
  const int OH = (H + 2 * ph - Kh) / stride + 1;
  const int OW = (W + 2 * pw - Kw) / stride + 1;
  if (H + 2 * ph < Kh || W + 2 * pw < Kw)
    throw std::invalid_argument("conv2d: kernel " + shape_str(w.shape()) +
                                " larger than padded input " + shape_str(x.shape()));

  const auto& xv = x.value();
  const auto& wv = w.value();
  std::vector<T> out(static_cast<size_t>(OH) * OW * Cout, T(0));
  if (b.defined()) {
    const auto& bv = b.value();
    for (int o = 0; o < OH * OW; ++o)
      for (int co = 0; co < Cout; ++co) out[static_cast<size_t>(o) * Cout + co] = bv[co];
  }
  for (int oy = 0; oy < OH; ++oy) {
    for (int ox = 0; ox < OW; ++ox) {
      T* orow = out.data() + (static_cast<size_t>(oy) * OW + ox) * Cout;
      for (int ky = 0; ky < Kh; ++ky) {
        const int iy = oy * stride - ph + ky;
        if (iy < 0 || iy >= H) continue;
        for (int kx = 0; kx < Kw; ++kx) {
          const int ix = ox * stride - pw + kx;
          if (ix < 0 || ix >= W) continue;
          const T* xrow = xv.data() + (static_cast<size_t>(iy) * W + ix) * Cin;
          const T* wrow = wv.data() + (static_cast<size_t>(ky) * Kw + kx) * Cin * Cout;
          for (int ci = 0; ci < Cin; ++ci) {
            const T xval = xrow[ci];
            const T* wci = wrow + static_cast<size_t>(ci) * Cout;
            for (int co = 0; co < Cout; ++co) orow[co] += xval * wci[co];
          }
        }
      }
    }
  }

  std::vector<Tensor<T>> parents = {x, w};
  if (b.defined()) parents.push_back(b);
  return Tensor<T>::make_op(
      {OH, OW, Cout}, std::move(out), std::move(parents),
      [H, W, Cin, Kh, Kw, Cout, OH, OW, ph, pw, stride](Node<T>& self) {
        Node<T>* px = self.parents[0].get();
        Node<T>* pw_ = self.parents[1].get();
        Node<T>* pb = self.parents.size() > 2 ? self.parents[2].get() : nullptr;
        const bool gx = px->requires_grad;
        const bool gw = pw_->requires_grad;
        const bool gb = pb && pb->requires_grad;
        for (int oy = 0; oy < OH; ++oy) {
          for (int ox = 0; ox < OW; ++ox) {
            const T* grow = self.grad.data() + (static_cast<size_t>(oy) * OW + ox) * Cout;
            if (gb)
              for (int co = 0; co < Cout; ++co) pb->grad[co] += grow[co];
            for (int ky = 0; ky < Kh; ++ky) {
              const int iy = oy * stride - ph + ky;
              if (iy < 0 || iy >= H) continue;
              for (int kx = 0; kx < Kw; ++kx) {
                const int ix = ox * stride - pw + kx;
                if (ix < 0 || ix >= W) continue;
                const size_t xoff = (static_cast<size_t>(iy) * W + ix) * Cin;
                const size_t woff = (static_cast<size_t>(ky) * Kw + kx) * Cin * Cout;
                for (int ci = 0; ci < Cin; ++ci) {
                  const T xval = px->value[xoff + ci];
                  const T* wci = pw_->value.data() + woff + static_cast<size_t>(ci) * Cout;
                  T acc = T(0);
                  if (gw) {
                    T* dwci = pw_->grad.data() + woff + static_cast<size_t>(ci) * Cout;
                    for (int co = 0; co < Cout; ++co) {
                      dwci[co] += xval * grow[co];
                      acc += wci[co] * grow[co];
                    }
                  } else {
                    for (int co = 0; co < Cout; ++co) acc += wci[co] * grow[co];
                  }
                  if (gx) px->grad[xoff + ci] += acc;
                }
              }
            }
          }
        }
      });
}

template <class T>
Tensor<T> conv2d_nobias(const Tensor<T>& x, const Tensor<T>& w, Padding padding, int stride = 1) {
  return conv2d(x, w, Tensor<T>(), padding, stride);
}

// ---- pooling ----

// Collapses the spatial grid to 1x1xD. Max mode remembers the first maximal
// position in row-major scan order, which is where the gradient is routed.
template <class T>
Tensor<T> pool_spatial(const Tensor<T>& x, PoolMode mode) {
  detail::expect_rank(x, 3, "pool_spatial");
  const int H = x.shape()[0], W = x.shape()[1], D = x.shape()[2];
  const int hw = H * W;
  const auto& xv = x.value();
  std::vector<T> out(static_cast<size_t>(D));
  std::vector<int> arg;
  if (mode == PoolMode::kAvg) {
    for (int d = 0; d < D; ++d) {
      T s = T(0);
      for (int p = 0; p < hw; ++p) s += xv[static_cast<size_t>(p) * D + d];
      out[d] = s / static_cast<T>(hw);
    }
  } else {
    arg.resize(D);
    for (int d = 0; d < D; ++d) {
      T best = xv[d];
      int bi = 0;
      for (int p = 1; p < hw; ++p) {
        const T v = xv[static_cast<size_t>(p) * D + d];
        if (v > best) {
          best = v;
          bi = p;
        }
      }
      out[d] = best;
      arg[d] = bi;
    }
  }
  return Tensor<T>::make_op({1, 1, D}, std::move(out), {x},
                            [mode, hw, D, arg = std::move(arg)](Node<T>& self) {
    Node<T>* p = self.parents[0].get();
    if (!p->requires_grad) return;
    if (mode == PoolMode::kAvg) {
      for (int d = 0; d < D; ++d) {
        const T g = self.grad[d] / static_cast<T>(hw);
        for (int q = 0; q < hw; ++q) p->grad[static_cast<size_t>(q) * D + d] += g;
      }
    } else {
      for (int d = 0; d < D; ++d) p->grad[static_cast<size_t>(arg[d]) * D + d] += self.grad[d];
    }
  });
}

// Collapses channels to HxWx1; max mode keeps the first maximal channel.
template <class T>
Tensor<T> pool_channel(const Tensor<T>& x, PoolMode mode) {
  detail::expect_rank(x, 3, "pool_channel");
  const int H = x.shape()[0], W = x.shape()[1], D = x.shape()[2];
  const int hw = H * W;
  const auto& xv = x.value();
  std::vector<T> out(static_cast<size_t>(hw));
  std::vector<int> arg;
  if (mode == PoolMode::kAvg) {
    for (int p = 0; p < hw; ++p) {
      T s = T(0);
      for (int d = 0; d < D; ++d) s += xv[static_cast<size_t>(p) * D + d];
      out[p] = s / static_cast<T>(D);
    }
  } else {
    arg.resize(hw);
    for (int p = 0; p < hw; ++p) {
      const T* row = xv.data() + static_cast<size_t>(p) * D;
      T best = row[0];
      int bi = 0;
      for (int d = 1; d < D; ++d)
        if (row[d] > best) {
          best = row[d];
          bi = d;
        }
      out[p] = best;
      arg[p] = bi;
    }
  }
  return Tensor<T>::make_op({H, W, 1}, std::move(out), {x},
                            [mode, hw, D, arg = std::move(arg)](Node<T>& self) {
    Node<T>* p = self.parents[0].get();
    if (!p->requires_grad) return;
    if (mode == PoolMode::kAvg) {
      for (int q = 0; q < hw; ++q) {
        const T g = self.grad[q] / static_cast<T>(D);
        for (int d = 0; d < D; ++d) p->grad[static_cast<size_t>(q) * D + d] += g;
      }
    } else {
      for (int q = 0; q < hw; ++q) p->grad[static_cast<size_t>(q) * D + arg[q]] += self.grad[q];
    }
  });
}

// ---- dense ----

// y = x * W + b for a single feature vector: x is n, W is n x m, b is m.
// Pass a default-constructed bias tensor to omit the additive term.
template <class T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  detail::expect_rank(x, 1, "dense");
  detail::expect_rank(w, 2, "dense");
  const int n = x.shape()[0], m = w.shape()[1];
  if (w.shape()[0] != n)
    throw std::invalid_argument("dense: incompatible shapes x=" + shape_str(x.shape()) +
                                " w=" + shape_str(w.shape()));
  if (b.defined()) {
    detail::expect_rank(b, 1, "dense");
    if (b.shape()[0] != m)
      throw std::invalid_argument("dense: bias extent " + shape_str(b.shape()) +
                                  " does not match weight " + shape_str(w.shape()));
  }
  const auto& xv = x.value();
  const auto& wv = w.value();
  std::vector<T> out = b.defined() ? b.value() : std::vector<T>(m, T(0));
  for (int i = 0; i < n; ++i) {
    const T xi = xv[i];
    const T* wrow = wv.data() + static_cast<size_t>(i) * m;
    for (int j = 0; j < m; ++j) out[j] += xi * wrow[j];
  }
  std::vector<Tensor<T>> parents = {x, w};
  if (b.defined()) parents.push_back(b);
  return Tensor<T>::make_op({m}, std::move(out), std::move(parents), [n, m](Node<T>& self) {
    Node<T>* px = self.parents[0].get();
    Node<T>* pw = self.parents[1].get();
    if (self.parents.size() > 2) {
      Node<T>* pb = self.parents[2].get();
      if (pb->requires_grad)
        for (int j = 0; j < m; ++j) pb->grad[j] += self.grad[j];
    }
    for (int i = 0; i < n; ++i) {
      const size_t off = static_cast<size_t>(i) * m;
      const T xi = px->value[i];
      T acc = T(0);
      for (int j = 0; j < m; ++j) {
        const T g = self.grad[j];
        if (pw->requires_grad) pw->grad[off + j] += xi * g;
        acc += pw->value[off + j] * g;
      }
      if (px->requires_grad) px->grad[i] += acc;
    }
  });
}

template <class T>
Tensor<T> dense_nobias(const Tensor<T>& x, const Tensor<T>& w) {
  return dense(x, w, Tensor<T>());
}

// ---- structural ops ----

template <class T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    throw std::invalid_argument("reshape: cannot view " + shape_str(x.shape()) + " as " +
                                shape_str(shape));
  std::vector<T> out(x.value());
  return Tensor<T>::make_op(std::move(shape), std::move(out), {x}, [](Node<T>& self) {
    Node<T>* p = self.parents[0].get();
    if (!p->requires_grad) return;
    for (size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
  });
}

// Extracts rows [y0, y0+rows) of an HxWxD map.
template <class T>
Tensor<T> slice_height(const Tensor<T>& x, int y0, int rows) {
  detail::expect_rank(x, 3, "slice_height");
  const int H = x.shape()[0], W = x.shape()[1], D = x.shape()[2];
  if (y0 < 0 || rows <= 0 || y0 + rows > H)
    throw std::invalid_argument("slice_height: rows [" + std::to_string(y0) + "," +
                                std::to_string(y0 + rows) + ") out of range for " +
                                shape_str(x.shape()));
  const size_t rowlen = static_cast<size_t>(W) * D;
  const auto& xv = x.value();
  std::vector<T> out(xv.begin() + y0 * rowlen, xv.begin() + (y0 + rows) * rowlen);
  return Tensor<T>::make_op({rows, W, D}, std::move(out), {x}, [y0, rowlen](Node<T>& self) {
    Node<T>* p = self.parents[0].get();
    if (!p->requires_grad) return;
    const size_t base = static_cast<size_t>(y0) * rowlen;
    for (size_t i = 0; i < self.grad.size(); ++i) p->grad[base + i] += self.grad[i];
  });
}

// Stacks maps along height; all inputs must agree on W and D.
template <class T>
Tensor<T> concat_height(const std::vector<Tensor<T>>& parts) {
  detail::require(!parts.empty(), "concat_height: empty input list");
  detail::expect_rank(parts[0], 3, "concat_height");
  const int W = parts[0].shape()[1], D = parts[0].shape()[2];
  int H = 0;
  std::vector<size_t> offsets;
  for (const auto& p : parts) {
    detail::expect_rank(p, 3, "concat_height");
    if (p.shape()[1] != W || p.shape()[2] != D)
      throw std::invalid_argument("concat_height: part " + shape_str(p.shape()) +
                                  " incompatible with " + shape_str(parts[0].shape()));
    offsets.push_back(static_cast<size_t>(H) * W * D);
    H += p.shape()[0];
  }
  std::vector<T> out(static_cast<size_t>(H) * W * D);
  for (size_t k = 0; k < parts.size(); ++k) {
    const auto& v = parts[k].value();
    std::copy(v.begin(), v.end(), out.begin() + offsets[k]);
  }
  return Tensor<T>::make_op({H, W, D}, std::move(out), parts,
                            [offsets = std::move(offsets)](Node<T>& self) {
    for (size_t k = 0; k < self.parents.size(); ++k) {
      Node<T>* p = self.parents[k].get();
      if (!p->requires_grad) continue;
      const size_t base = offsets[k];
      for (size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += self.grad[base + i];
    }
  });
}

// Concatenates two maps along the channel axis.
template <class T>
Tensor<T> concat_channel(const Tensor<T>& a, const Tensor<T>& b) {
  detail::expect_rank(a, 3, "concat_channel");
  detail::expect_rank(b, 3, "concat_channel");
  const int H = a.shape()[0], W = a.shape()[1], Da = a.shape()[2], Db = b.shape()[2];
  if (b.shape()[0] != H || b.shape()[1] != W)
    throw std::invalid_argument("concat_channel: grids differ: " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  const int hw = H * W;
  const auto& av = a.value();
  const auto& bv = b.value();
  std::vector<T> out(static_cast<size_t>(hw) * (Da + Db));
  for (int p = 0; p < hw; ++p) {
    T* row = out.data() + static_cast<size_t>(p) * (Da + Db);
    for (int d = 0; d < Da; ++d) row[d] = av[static_cast<size_t>(p) * Da + d];
    for (int d = 0; d < Db; ++d) row[Da + d] = bv[static_cast<size_t>(p) * Db + d];
  }
  return Tensor<T>::make_op({H, W, Da + Db}, std::move(out), {a, b},
                            [hw, Da, Db](Node<T>& self) {
    Node<T>* pa = self.parents[0].get();
    Node<T>* pb = self.parents[1].get();
    for (int p = 0; p < hw; ++p) {
      const T* grow = self.grad.data() + static_cast<size_t>(p) * (Da + Db);
      if (pa->requires_grad)
        for (int d = 0; d < Da; ++d) pa->grad[static_cast<size_t>(p) * Da + d] += grow[d];
      if (pb->requires_grad)
        for (int d = 0; d < Db; ++d) pb->grad[static_cast<size_t>(p) * Db + d] += grow[Da + d];
    }
  });
}

// Stacks n length-d vectors into an n x d matrix.
template <class T>
Tensor<T> stack_rows(const std::vector<Tensor<T>>& rows) {
  detail::require(!rows.empty(), "stack_rows: empty input list");
  detail::expect_rank(rows[0], 1, "stack_rows");
  const int d = rows[0].shape()[0];
  for (const auto& r : rows) {
    detail::expect_rank(r, 1, "stack_rows");
    if (r.shape()[0] != d)
      throw std::invalid_argument("stack_rows: row " + shape_str(r.shape()) +
                                  " incompatible with first row length " + std::to_string(d));
  }
  const int n = static_cast<int>(rows.size());
  std::vector<T> out(static_cast<size_t>(n) * d);
  for (int i = 0; i < n; ++i) {
    const auto& v = rows[i].value();
    std::copy(v.begin(), v.end(), out.begin() + static_cast<size_t>(i) * d);
  }
  return Tensor<T>::make_op({n, d}, std::move(out), rows, [d](Node<T>& self) {
    for (size_t i = 0; i < self.parents.size(); ++i) {
      Node<T>* p = self.parents[i].get();
      if (!p->requires_grad) continue;
      const size_t base = i * static_cast<size_t>(d);
      for (int j = 0; j < d; ++j) p->grad[j] += self.grad[base + j];
    }
  });
}

template <class T>
Tensor<T> sum_all(const Tensor<T>& x) {
  const auto& xv = x.value();
  T s = T(0);
  for (const T v : xv) s += v;
  return Tensor<T>::make_op({1}, {s}, {x}, [](Node<T>& self) {
    Node<T>* p = self.parents[0].get();
    if (!p->requires_grad) return;
    const T g = self.grad[0];
    for (size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += g;
  });
}

}  // namespace xreid
