#pragma once

#include <cmath>
#include <vector>

#include "evtex/autodiff.hpp"
#include "evtex/events.hpp"
#include "evtex/render.hpp"

namespace evtex {

constexpr double kDefaultContrastThreshold = 0.2;  // fixed, never learnable

struct V2EOptions {
  double theta = kDefaultContrastThreshold;
  int bins = 10;
  // When true, the floor quantizer is replaced by its smooth surrogate
  // (identity), making the whole path finite-difference checkable. The
  // residual is identically zero in that mode.
  bool smooth_quantization = false;
};

inline ad::DiffTensor to_log_luma(const ad::DiffTensor& frame) {
  for (double x : frame.v)
    if (x < kEpsLum)
      throw std::domain_error("to_log_luma: intensity below " + std::to_string(kEpsLum));
  return ad::log(frame);
}

// Per-pixel recurrence state. All members are full-resolution tensors on the
// caller's tape.
struct V2EState {
  ad::DiffTensor reference;  // log I_{t1}
  ad::DiffTensor s_prev;     // accumulated quantized change at t_k
  ad::DiffTensor residual;   // r in [0,1), zero at t_1
  double theta = kDefaultContrastThreshold;
  bool smooth = false;

  static V2EState init(const ad::DiffTensor& first_frame, double theta, bool smooth) {
    if (theta <= 0.0) throw std::invalid_argument("v2e: theta must be positive");
    V2EState st;
    st.reference = to_log_luma(first_frame);
    st.s_prev = ad::constant_fill(first_frame.shape, 0.0);
    st.residual = ad::constant_fill(first_frame.shape, 0.0);
    st.theta = theta;
    st.smooth = smooth;
    return st;
  }
};

struct EventCountMaps {
  ad::DiffTensor n_pos;
  ad::DiffTensor n_neg;
};

// One interval of the appendix recurrence:
//   S^ = (log I_{k+1} - log I_1) / theta
//   S  = floor(S^ + r_k)            (STE floor; identity in smooth mode)
//   r_{k+1} = S^ + r_k - S
//   D  = S - S_prev;  N+ = h(D);  N- = h(-D)
// The alternative reading S = floor(S^) + r with an independently updated r
// does not telescope exactly and is not implemented.
inline EventCountMaps v2e_step(V2EState& state, const ad::DiffTensor& frame) {
  if (frame.shape != state.reference.shape)
    throw std::invalid_argument("v2e_step: frame geometry mismatch");
  ad::DiffTensor s_hat =
      ad::affine(ad::sub(to_log_luma(frame), state.reference), 1.0 / state.theta, 0.0);
  ad::DiffTensor pre = ad::add(s_hat, state.residual);
  ad::DiffTensor s = state.smooth ? pre : ad::ste_floor(pre);
  state.residual = ad::sub(pre, s);
  ad::DiffTensor d = ad::sub(s, state.s_prev);
  state.s_prev = s;
  return EventCountMaps{ad::half_rectify(d), ad::half_rectify(ad::neg(d))};
}

struct V2EResult {
  ad::DiffTensor tensor;  // (2*B, H, W): positive bins then negative bins
  EventStream stream;     // non-differentiable export of the same counts
  std::vector<EventCountMaps> intervals;
};

// Runs the recurrence over consecutive frame pairs and bins each interval's
// counts at the timestamp t_{k+1} over [t_1, t_N + 1us). The tensor path
// carries gradients; the stream is the integer export.
inline V2EResult v2e_sequence(const FrameSequence& frames, const V2EOptions& opt) {
  const size_t n = frames.frames.size();
  if (n < 2) throw std::invalid_argument("v2e_sequence: need at least 2 frames");
  if (opt.bins < 1) throw std::invalid_argument("v2e_sequence: bins must be >= 1");
  const int H = frames.height, W = frames.width;
  const uint64_t t_start = frames.times_us.front();
  const uint64_t t_end = frames.times_us.back() + 1;

  V2EState state = V2EState::init(frames.frames[0], opt.theta, opt.smooth_quantization);
  std::vector<ad::DiffTensor> pos_bins(static_cast<size_t>(opt.bins)),
      neg_bins(static_cast<size_t>(opt.bins));
  for (int b = 0; b < opt.bins; ++b) {
    pos_bins[static_cast<size_t>(b)] = ad::constant_fill({H, W}, 0.0);
    neg_bins[static_cast<size_t>(b)] = ad::constant_fill({H, W}, 0.0);
  }

  V2EResult out;
  out.stream.width = static_cast<uint16_t>(W);
  out.stream.height = static_cast<uint16_t>(H);
  out.stream.t_start = t_start;
  out.stream.t_end = t_end;

  for (size_t k = 1; k < n; ++k) {
    EventCountMaps maps = v2e_step(state, frames.frames[k]);
    const uint64_t t = frames.times_us[k];
    const int tau = bin_index(t, t_start, t_end, opt.bins);
    pos_bins[static_cast<size_t>(tau)] = ad::add(pos_bins[static_cast<size_t>(tau)], maps.n_pos);
    neg_bins[static_cast<size_t>(tau)] = ad::add(neg_bins[static_cast<size_t>(tau)], maps.n_neg);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        size_t i = static_cast<size_t>(y) * W + x;
        long np = std::lround(maps.n_pos.v[i]);
        long nn = std::lround(maps.n_neg.v[i]);
        for (long e = 0; e < np; ++e)
          out.stream.events.push_back(
              Event{static_cast<uint16_t>(x), static_cast<uint16_t>(y), t, +1});
        for (long e = 0; e < nn; ++e)
          out.stream.events.push_back(
              Event{static_cast<uint16_t>(x), static_cast<uint16_t>(y), t, -1});
      }
    out.intervals.push_back(std::move(maps));
  }

  std::vector<ad::DiffTensor> all = pos_bins;
  all.insert(all.end(), neg_bins.begin(), neg_bins.end());
  out.tensor = ad::concat(all, {2 * opt.bins, H, W});
  return out;
}

// Strictly sequential per-pixel scalar reference for the same recurrence. No
// vectorization, no differentiation; the independent check for the fast path.
struct V2EOracleResult {
  std::vector<std::vector<long>> pos_counts;  // [interval][pixel]
  std::vector<std::vector<long>> neg_counts;
  EventStream stream;
};

inline V2EOracleResult v2e_oracle(const std::vector<std::vector<double>>& frames,
                                  const std::vector<uint64_t>& times_us, int width, int height,
                                  double theta) {
  if (frames.size() < 2) throw std::invalid_argument("v2e_oracle: need at least 2 frames");
  if (theta <= 0.0) throw std::invalid_argument("v2e_oracle: theta must be positive");
  const size_t n = frames.size();
  const size_t npix = static_cast<size_t>(width) * height;
  V2EOracleResult out;
  out.stream.width = static_cast<uint16_t>(width);
  out.stream.height = static_cast<uint16_t>(height);
  out.stream.t_start = times_us.front();
  out.stream.t_end = times_us.back() + 1;
  out.pos_counts.assign(n - 1, std::vector<long>(npix, 0));
  out.neg_counts.assign(n - 1, std::vector<long>(npix, 0));

  for (size_t i = 0; i < npix; ++i) {
    double ref = std::log(frames[0][i]);
    double s_prev = 0.0, r = 0.0;
    for (size_t k = 1; k < n; ++k) {
      double s_hat = (std::log(frames[k][i]) - ref) / theta;
      double a = s_hat + r;
      double s = std::floor(a);
      r = a - s;
      double d = s - s_prev;
      s_prev = s;
      if (d > 0)
        out.pos_counts[k - 1][i] = static_cast<long>(d);
      else
        out.neg_counts[k - 1][i] = static_cast<long>(-d);
    }
  }
  for (size_t k = 1; k < n; ++k) {
    uint64_t t = times_us[k];
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        size_t i = static_cast<size_t>(y) * width + x;
        for (long e = 0; e < out.pos_counts[k - 1][i]; ++e)
          out.stream.events.push_back(
              Event{static_cast<uint16_t>(x), static_cast<uint16_t>(y), t, +1});
        for (long e = 0; e < out.neg_counts[k - 1][i]; ++e)
          out.stream.events.push_back(
              Event{static_cast<uint16_t>(x), static_cast<uint16_t>(y), t, -1});
      }
  }
  return out;
}

}  // namespace evtex
