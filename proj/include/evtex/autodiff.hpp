#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace evtex::ad {

class Tape;

// Dense 64-bit tensor, optionally attached to a tape node. node < 0 means
// constant: no gradient is tracked through it.
struct DiffTensor {
  std::vector<int> shape;
  std::vector<double> v;
  int node = -1;
  Tape* tape = nullptr;

  int size() const { return static_cast<int>(v.size()); }
  bool tracked() const { return node >= 0; }
  double scalar() const {
    if (v.size() != 1) throw std::logic_error("scalar() on non-scalar tensor");
    return v[0];
  }
};

inline int shape_size(const std::vector<int>& shape) {
  int n = 1;
  for (int d : shape) n *= d;
  return n;
}

inline DiffTensor constant(std::vector<int> shape, std::vector<double> values) {
  if (shape_size(shape) != static_cast<int>(values.size()))
    throw std::invalid_argument("constant: shape/value size mismatch");
  return DiffTensor{std::move(shape), std::move(values), -1, nullptr};
}

inline DiffTensor constant_scalar(double x) { return constant({1}, {x}); }

inline DiffTensor constant_fill(std::vector<int> shape, double x) {
  int n = shape_size(shape);
  return constant(std::move(shape), std::vector<double>(static_cast<size_t>(n), x));
}

// Reverse-mode tape. Single-writer during forward recording, single-reader
// during backward. One tape per pipeline instance.
class Tape {
 public:
  DiffTensor var(std::vector<int> shape, std::vector<double> values) {
    if (shape_size(shape) != static_cast<int>(values.size()))
      throw std::invalid_argument("var: shape/value size mismatch");
    int id = reserve(static_cast<int>(values.size()));
    return DiffTensor{std::move(shape), std::move(values), id, this};
  }

  int reserve(int out_size) {
    grads_.emplace_back(static_cast<size_t>(out_size), 0.0);
    backs_.emplace_back();
    return static_cast<int>(backs_.size()) - 1;
  }

  void set_back(int node, std::function<void(Tape&)> back) {
    backs_.at(static_cast<size_t>(node)) = std::move(back);
  }

  std::vector<double>& grad(int node) { return grads_.at(static_cast<size_t>(node)); }

  // Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse. Gradients of
  // fan-out nodes accumulate by addition.
  void backward(const DiffTensor& loss) {
    if (loss.size() != 1 || !loss.tracked() || loss.tape != this)
      throw std::invalid_argument("backward: loss must be a scalar recorded on this tape");
    for (auto& g : grads_) std::fill(g.begin(), g.end(), 0.0);
    grads_[static_cast<size_t>(loss.node)][0] = 1.0;
    for (int i = loss.node; i >= 0; --i)
      if (backs_[static_cast<size_t>(i)]) backs_[static_cast<size_t>(i)](*this);
  }

  void clear() {
    grads_.clear();
    backs_.clear();
  }

  size_t node_count() const { return backs_.size(); }

 private:
  std::vector<std::vector<double>> grads_;
  std::vector<std::function<void(Tape&)>> backs_;
};

namespace detail {

inline Tape* tape_of(const DiffTensor& a) { return a.tracked() ? a.tape : nullptr; }

inline Tape* tape_of(const DiffTensor& a, const DiffTensor& b) {
  Tape* ta = tape_of(a);
  Tape* tb = tape_of(b);
  if (ta && tb && ta != tb) throw std::invalid_argument("operands recorded on different tapes");
  return ta ? ta : tb;
}

inline void check_same_shape(const DiffTensor& a, const DiffTensor& b, const char* op) {
  if (a.shape != b.shape)
    throw std::invalid_argument(std::string(op) +
                                ": shape mismatch between operands of equal-shape op");
}

// Binary elementwise op. Shapes must match, or one operand may be scalar
// (broadcast). dfa/dfb give local partials as functions of (a_i, b_i).
template <class F, class DA, class DB>
DiffTensor binary_ew(const DiffTensor& a, const DiffTensor& b, const char* name, F f, DA dfa,
                     DB dfb) {
  const bool a_scalar = a.size() == 1;
  const bool b_scalar = b.size() == 1;
  if (!a_scalar && !b_scalar) check_same_shape(a, b, name);
  const DiffTensor& big = (b_scalar && !a_scalar) ? a : (a_scalar && !b_scalar ? b : a);

  DiffTensor out;
  out.shape = big.shape;
  out.v.resize(static_cast<size_t>(big.size()));
  const int n = big.size();
  for (int i = 0; i < n; ++i) {
    double ai = a.v[static_cast<size_t>(a_scalar ? 0 : i)];
    double bi = b.v[static_cast<size_t>(b_scalar ? 0 : i)];
    out.v[static_cast<size_t>(i)] = f(ai, bi);
  }

  Tape* t = tape_of(a, b);
  if (!t) return out;
  out.tape = t;
  out.node = t->reserve(n);
  const int out_node = out.node;
  const int an = a.node, bn = b.node;
  auto av = a.v;
  auto bv = b.v;
  t->set_back(out_node, [=](Tape& tp) {
    const auto& g = tp.grad(out_node);
    if (an >= 0) {
      auto& ga = tp.grad(an);
      for (int i = 0; i < n; ++i) {
        double ai = av[static_cast<size_t>(a_scalar ? 0 : i)];
        double bi = bv[static_cast<size_t>(b_scalar ? 0 : i)];
        ga[static_cast<size_t>(a_scalar ? 0 : i)] += dfa(ai, bi) * g[static_cast<size_t>(i)];
      }
    }
    if (bn >= 0) {
      auto& gb = tp.grad(bn);
      for (int i = 0; i < n; ++i) {
        double ai = av[static_cast<size_t>(a_scalar ? 0 : i)];
        double bi = bv[static_cast<size_t>(b_scalar ? 0 : i)];
        gb[static_cast<size_t>(b_scalar ? 0 : i)] += dfb(ai, bi) * g[static_cast<size_t>(i)];
      }
    }
  });
  return out;
}

// Unary elementwise op with local partial df(x).
template <class F, class DF>
DiffTensor unary_ew(const DiffTensor& a, F f, DF df) {
  DiffTensor out;
  out.shape = a.shape;
  out.v.resize(a.v.size());
  const int n = a.size();
  for (int i = 0; i < n; ++i) out.v[static_cast<size_t>(i)] = f(a.v[static_cast<size_t>(i)]);
  if (!a.tracked()) return out;
  Tape* t = a.tape;
  out.tape = t;
  out.node = t->reserve(n);
  const int out_node = out.node, an = a.node;
  auto av = a.v;
  t->set_back(out_node, [=](Tape& tp) {
    const auto& g = tp.grad(out_node);
    auto& ga = tp.grad(an);
    for (int i = 0; i < n; ++i)
      ga[static_cast<size_t>(i)] += df(av[static_cast<size_t>(i)]) * g[static_cast<size_t>(i)];
  });
  return out;
}

}  // namespace detail

// ---- elementwise primitives --------------------------------------------

inline DiffTensor add(const DiffTensor& a, const DiffTensor& b) {
  return detail::binary_ew(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

inline DiffTensor sub(const DiffTensor& a, const DiffTensor& b) {
  return detail::binary_ew(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

inline DiffTensor mul(const DiffTensor& a, const DiffTensor& b) {
  return detail::binary_ew(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

inline DiffTensor div(const DiffTensor& a, const DiffTensor& b) {
  return detail::binary_ew(
      a, b, "div", [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

// Elementwise max/min; on ties the gradient goes to the first operand.
inline DiffTensor emax(const DiffTensor& a, const DiffTensor& b) {
  return detail::binary_ew(
      a, b, "emax", [](double x, double y) { return x >= y ? x : y; },
      [](double x, double y) { return x >= y ? 1.0 : 0.0; },
      [](double x, double y) { return x >= y ? 0.0 : 1.0; });
}

inline DiffTensor emin(const DiffTensor& a, const DiffTensor& b) {
  return detail::binary_ew(
      a, b, "emin", [](double x, double y) { return x <= y ? x : y; },
      [](double x, double y) { return x <= y ? 1.0 : 0.0; },
      [](double x, double y) { return x <= y ? 0.0 : 1.0; });
}

// y = s*x + c with constant s, c.
inline DiffTensor affine(const DiffTensor& a, double s, double c) {
  return detail::unary_ew(
      a, [=](double x) { return s * x + c; }, [=](double) { return s; });
}

inline DiffTensor neg(const DiffTensor& a) { return affine(a, -1.0, 0.0); }

inline DiffTensor log(const DiffTensor& a) {
  for (double x : a.v)
    if (!(x > 0.0))
      throw std::domain_error("log: input must be strictly positive, got " + std::to_string(x));
  return detail::unary_ew(
      a, [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
}

inline DiffTensor exp(const DiffTensor& a) {
  return detail::unary_ew(
      a, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
}

// h(x) = max(x, 0); subgradient 0 at the kink.
inline DiffTensor half_rectify(const DiffTensor& a) {
  return detail::unary_ew(
      a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

inline DiffTensor sigmoid(const DiffTensor& a) {
  auto s = [](double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
  };
  return detail::unary_ew(a, s, [s](double x) {
    double y = s(x);
    return y * (1.0 - y);
  });
}

inline DiffTensor softplus(const DiffTensor& a) {
  auto s = [](double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
  };
  return detail::unary_ew(
      a, [](double x) { return (x > 0.0 ? x : 0.0) + std::log1p(std::exp(-std::abs(x))); }, s);
}

// ---- straight-through estimators ----------------------------------------
// Forward is the hard function exactly; backward passes the adjoint through
// unchanged.

inline DiffTensor ste_floor(const DiffTensor& a) {
  return detail::unary_ew(
      a, [](double x) { return std::floor(x); }, [](double) { return 1.0; });
}

inline DiffTensor ste_threshold(const DiffTensor& a) {
  // 1 if x > 0.5 (strict), else 0.
  return detail::unary_ew(
      a, [](double x) { return x > 0.5 ? 1.0 : 0.0; }, [](double) { return 1.0; });
}

// ---- reductions ----------------------------------------------------------

inline DiffTensor sum(const DiffTensor& a) {
  DiffTensor out;
  out.shape = {1};
  out.v = {std::accumulate(a.v.begin(), a.v.end(), 0.0)};
  if (!a.tracked()) return out;
  Tape* t = a.tape;
  out.tape = t;
  out.node = t->reserve(1);
  const int out_node = out.node, an = a.node, n = a.size();
  t->set_back(out_node, [=](Tape& tp) {
    double g = tp.grad(out_node)[0];
    auto& ga = tp.grad(an);
    for (int i = 0; i < n; ++i) ga[static_cast<size_t>(i)] += g;
  });
  return out;
}

inline DiffTensor mean(const DiffTensor& a) {
  return affine(sum(a), 1.0 / static_cast<double>(a.size()), 0.0);
}

// Global max; gradient flows to the first-index argmax only.
inline DiffTensor max(const DiffTensor& a) {
  if (a.size() == 0) throw std::invalid_argument("max: empty tensor");
  int arg = 0;
  for (int i = 1; i < a.size(); ++i)
    if (a.v[static_cast<size_t>(i)] > a.v[static_cast<size_t>(arg)]) arg = i;
  DiffTensor out;
  out.shape = {1};
  out.v = {a.v[static_cast<size_t>(arg)]};
  if (!a.tracked()) return out;
  Tape* t = a.tape;
  out.tape = t;
  out.node = t->reserve(1);
  const int out_node = out.node, an = a.node;
  t->set_back(out_node, [=](Tape& tp) {
    tp.grad(an)[static_cast<size_t>(arg)] += tp.grad(out_node)[0];
  });
  return out;
}

// ---- structural ops -------------------------------------------------------

inline DiffTensor reshape(const DiffTensor& a, std::vector<int> shape) {
  if (shape_size(shape) != a.size())
    throw std::invalid_argument("reshape: element count mismatch, expected " +
                                std::to_string(a.size()) + " got " +
                                std::to_string(shape_size(shape)));
  DiffTensor out = a;
  out.shape = std::move(shape);
  return out;
}

// Gathers flat indices into a 1-D tensor. Backward scatters.
inline DiffTensor gather(const DiffTensor& a, const std::vector<int>& idx) {
  DiffTensor out;
  out.shape = {static_cast<int>(idx.size())};
  out.v.resize(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) {
    int j = idx[i];
    if (j < 0 || j >= a.size()) throw std::out_of_range("gather: index out of range");
    out.v[i] = a.v[static_cast<size_t>(j)];
  }
  if (!a.tracked()) return out;
  Tape* t = a.tape;
  out.tape = t;
  out.node = t->reserve(static_cast<int>(idx.size()));
  const int out_node = out.node, an = a.node;
  auto ids = idx;
  t->set_back(out_node, [=](Tape& tp) {
    const auto& g = tp.grad(out_node);
    auto& ga = tp.grad(an);
    for (size_t i = 0; i < ids.size(); ++i) ga[static_cast<size_t>(ids[i])] += g[i];
  });
  return out;
}

// Adds the 1-D values of `src` into a zero tensor of `shape` at flat indices
// `idx` (duplicates accumulate). Adjoint of gather.
inline DiffTensor scatter_add(const DiffTensor& src, const std::vector<int>& idx,
                              std::vector<int> shape) {
  if (static_cast<int>(idx.size()) != src.size())
    throw std::invalid_argument("scatter_add: index/value count mismatch");
  DiffTensor out;
  out.shape = std::move(shape);
  out.v.assign(static_cast<size_t>(shape_size(out.shape)), 0.0);
  for (size_t i = 0; i < idx.size(); ++i) {
    int j = idx[i];
    if (j < 0 || j >= static_cast<int>(out.v.size()))
      throw std::out_of_range("scatter_add: index out of range");
    out.v[static_cast<size_t>(j)] += src.v[i];
  }
  if (!src.tracked()) return out;
  Tape* t = src.tape;
  out.tape = t;
  out.node = t->reserve(out.size());
  const int out_node = out.node, sn = src.node;
  auto ids = idx;
  t->set_back(out_node, [=](Tape& tp) {
    const auto& g = tp.grad(out_node);
    auto& gs = tp.grad(sn);
    for (size_t i = 0; i < ids.size(); ++i) gs[i] += g[static_cast<size_t>(ids[i])];
  });
  return out;
}

// Concatenates flattened tensors into one tensor of the given shape.
inline DiffTensor concat(const std::vector<DiffTensor>& parts, std::vector<int> shape) {
  int total = 0;
  Tape* t = nullptr;
  for (const auto& p : parts) {
    total += p.size();
    if (p.tracked()) {
      if (t && t != p.tape) throw std::invalid_argument("concat: mixed tapes");
      t = p.tape;
    }
  }
  if (total != shape_size(shape)) throw std::invalid_argument("concat: shape mismatch");
  DiffTensor out;
  out.shape = std::move(shape);
  out.v.reserve(static_cast<size_t>(total));
  for (const auto& p : parts) out.v.insert(out.v.end(), p.v.begin(), p.v.end());
  if (!t) return out;
  out.tape = t;
  out.node = t->reserve(total);
  const int out_node = out.node;
  std::vector<std::pair<int, int>> spans;  // (node, size), node -1 for constants
  for (const auto& p : parts) spans.emplace_back(p.node, p.size());
  t->set_back(out_node, [=](Tape& tp) {
    const auto& g = tp.grad(out_node);
    size_t off = 0;
    for (auto [node, sz] : spans) {
      if (node >= 0) {
        auto& gp = tp.grad(node);
        for (int i = 0; i < sz; ++i) gp[static_cast<size_t>(i)] += g[off + static_cast<size_t>(i)];
      }
      off += static_cast<size_t>(sz);
    }
  });
  return out;
}

// Nearest-neighbor upsample of an (n, n) tensor by integer factor c.
inline DiffTensor upsample_nearest(const DiffTensor& a, int c) {
  if (a.shape.size() != 2) throw std::invalid_argument("upsample_nearest: expected 2-D tensor");
  if (c < 1) throw std::invalid_argument("upsample_nearest: factor must be >= 1");
  const int n0 = a.shape[0], n1 = a.shape[1];
  const int H = n0 * c, W = n1 * c;
  std::vector<int> idx(static_cast<size_t>(H) * static_cast<size_t>(W));
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      idx[static_cast<size_t>(y) * static_cast<size_t>(W) + static_cast<size_t>(x)] =
          (y / c) * n1 + (x / c);
  DiffTensor out = gather(a, idx);
  out.shape = {H, W};
  return out;
}

// Samples a 2-D image at the given (x, y) coordinates with bilinear weights.
// Coordinates are constants (clamped to the image); only the image carries
// gradient, splatted to the 4 neighbors by their weights.
inline DiffTensor bilinear_sample(const DiffTensor& img, const std::vector<double>& xs,
                                  const std::vector<double>& ys) {
  if (img.shape.size() != 2) throw std::invalid_argument("bilinear_sample: expected 2-D image");
  if (xs.size() != ys.size()) throw std::invalid_argument("bilinear_sample: coord size mismatch");
  const int H = img.shape[0], W = img.shape[1];
  const int n = static_cast<int>(xs.size());

  struct Tap {
    int i00, i01, i10, i11;
    double w00, w01, w10, w11;
  };
  std::vector<Tap> taps(static_cast<size_t>(n));
  DiffTensor out;
  out.shape = {n};
  out.v.resize(static_cast<size_t>(n));
  for (int k = 0; k < n; ++k) {
    double x = std::clamp(xs[static_cast<size_t>(k)], 0.0, static_cast<double>(W - 1));
    double y = std::clamp(ys[static_cast<size_t>(k)], 0.0, static_cast<double>(H - 1));
    int x0 = static_cast<int>(std::floor(x));
    int y0 = static_cast<int>(std::floor(y));
    int x1 = std::min(x0 + 1, W - 1);
    int y1 = std::min(y0 + 1, H - 1);
    double fx = x - x0, fy = y - y0;
    Tap& tp = taps[static_cast<size_t>(k)];
    tp.i00 = y0 * W + x0;
    tp.i01 = y0 * W + x1;
    tp.i10 = y1 * W + x0;
    tp.i11 = y1 * W + x1;
    tp.w00 = (1 - fx) * (1 - fy);
    tp.w01 = fx * (1 - fy);
    tp.w10 = (1 - fx) * fy;
    tp.w11 = fx * fy;
    out.v[static_cast<size_t>(k)] =
        tp.w00 * img.v[static_cast<size_t>(tp.i00)] + tp.w01 * img.v[static_cast<size_t>(tp.i01)] +
        tp.w10 * img.v[static_cast<size_t>(tp.i10)] + tp.w11 * img.v[static_cast<size_t>(tp.i11)];
  }
  if (!img.tracked()) return out;
  Tape* t = img.tape;
  out.tape = t;
  out.node = t->reserve(n);
  const int out_node = out.node, in = img.node;
  t->set_back(out_node, [=, taps = std::move(taps)](Tape& tp) {
    const auto& g = tp.grad(out_node);
    auto& gi = tp.grad(in);
    for (int k = 0; k < n; ++k) {
      const Tap& q = taps[static_cast<size_t>(k)];
      double gk = g[static_cast<size_t>(k)];
      gi[static_cast<size_t>(q.i00)] += q.w00 * gk;
      gi[static_cast<size_t>(q.i01)] += q.w01 * gk;
      gi[static_cast<size_t>(q.i10)] += q.w10 * gk;
      gi[static_cast<size_t>(q.i11)] += q.w11 * gk;
    }
  });
  return out;
}

// 2-D convolution: input (C, H, W), kernel (OC, C, KH, KW), bias (OC),
// stride s, zero padding p. Output (OC, OH, OW).
inline DiffTensor conv2d(const DiffTensor& input, const DiffTensor& kernel, const DiffTensor& bias,
                         int stride, int pad) {
  if (input.shape.size() != 3 || kernel.shape.size() != 4)
    throw std::invalid_argument("conv2d: expected input (C,H,W) and kernel (OC,C,KH,KW)");
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  const int C = input.shape[0], H = input.shape[1], W = input.shape[2];
  const int OC = kernel.shape[0], KC = kernel.shape[1], KH = kernel.shape[2], KW = kernel.shape[3];
  if (KC != C)
    throw std::invalid_argument("conv2d: channel mismatch, expected " + std::to_string(KC) +
                                " input channels, got " + std::to_string(C));
  if (bias.size() != OC) throw std::invalid_argument("conv2d: bias size mismatch");
  const int OH = (H + 2 * pad - KH) / stride + 1;
  const int OW = (W + 2 * pad - KW) / stride + 1;
  if (OH < 1 || OW < 1) throw std::invalid_argument("conv2d: output would be empty");

  DiffTensor out;
  out.shape = {OC, OH, OW};
  out.v.assign(static_cast<size_t>(OC) * OH * OW, 0.0);
  auto in_at = [&](int c, int y, int x) -> double {
    if (y < 0 || y >= H || x < 0 || x >= W) return 0.0;
    return input.v[(static_cast<size_t>(c) * H + y) * W + x];
  };
  for (int oc = 0; oc < OC; ++oc)
    for (int oy = 0; oy < OH; ++oy)
      for (int ox = 0; ox < OW; ++ox) {
        double acc = bias.v[static_cast<size_t>(oc)];
        for (int c = 0; c < C; ++c)
          for (int ky = 0; ky < KH; ++ky)
            for (int kx = 0; kx < KW; ++kx)
              acc += kernel.v[((static_cast<size_t>(oc) * C + c) * KH + ky) * KW + kx] *
                     in_at(c, oy * stride + ky - pad, ox * stride + kx - pad);
        out.v[(static_cast<size_t>(oc) * OH + oy) * OW + ox] = acc;
      }

  Tape* t = detail::tape_of(input, kernel);
  if (Tape* tb = detail::tape_of(bias); tb && t && tb != t)
    throw std::invalid_argument("conv2d: mixed tapes");
  else if (tb && !t)
    t = tb;
  if (!t) return out;
  out.tape = t;
  out.node = t->reserve(out.size());
  const int out_node = out.node;
  const int in_node = input.node, k_node = kernel.node, b_node = bias.node;
  auto in_v = input.v;
  auto k_v = kernel.v;
  t->set_back(out_node, [=](Tape& tp) {
    const auto& g = tp.grad(out_node);
    std::vector<double>* gin = in_node >= 0 ? &tp.grad(in_node) : nullptr;
    std::vector<double>* gk = k_node >= 0 ? &tp.grad(k_node) : nullptr;
    std::vector<double>* gb = b_node >= 0 ? &tp.grad(b_node) : nullptr;
    for (int oc = 0; oc < OC; ++oc)
      for (int oy = 0; oy < OH; ++oy)
        for (int ox = 0; ox < OW; ++ox) {
          double go = g[(static_cast<size_t>(oc) * OH + oy) * OW + ox];
          if (go == 0.0) continue;
          if (gb) (*gb)[static_cast<size_t>(oc)] += go;
          for (int c = 0; c < C; ++c)
            for (int ky = 0; ky < KH; ++ky)
              for (int kx = 0; kx < KW; ++kx) {
                int iy = oy * stride + ky - pad;
                int ix = ox * stride + kx - pad;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                size_t ii = (static_cast<size_t>(c) * H + iy) * W + ix;
                size_t ki = ((static_cast<size_t>(oc) * C + c) * KH + ky) * KW + kx;
                if (gin) (*gin)[ii] += k_v[ki] * go;
                if (gk) (*gk)[ki] += in_v[ii] * go;
              }
        }
  });
  return out;
}

// ---- verification harness -------------------------------------------------

// Max over coordinates of |analytic - central difference| /
// (|central difference| + eps). f must be deterministic and smooth along the
// checked path.
inline double finite_diff_check(const std::function<DiffTensor(Tape&, const DiffTensor&)>& f,
                                const std::vector<int>& shape, const std::vector<double>& x0,
                                double h = 1e-5) {
  if (h <= 0.0) throw std::invalid_argument("finite_diff_check: step must be positive");
  constexpr double kEps = 1e-12;
  std::vector<double> analytic;
  {
    Tape tape;
    DiffTensor x = tape.var(shape, x0);
    DiffTensor y = f(tape, x);
    tape.backward(y);
    analytic = tape.grad(x.node);
  }
  double worst = 0.0;
  for (size_t i = 0; i < x0.size(); ++i) {
    auto eval = [&](double xi) {
      Tape tape;
      std::vector<double> xv = x0;
      xv[i] = xi;
      DiffTensor x = tape.var(shape, xv);
      return f(tape, x).scalar();
    };
    double fd = (eval(x0[i] + h) - eval(x0[i] - h)) / (2.0 * h);
    double err = std::abs(analytic[i] - fd) / (std::abs(fd) + kEps);
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace evtex::ad
