#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "evtex/autodiff.hpp"
#include "evtex/box.hpp"
#include "evtex/texture.hpp"
#include "evtex/util.hpp"

namespace evtex {

constexpr double kEpsLum = 1e-3;  // frames stay in [kEpsLum, 1] so log is defined

struct geometry_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One rectangular body part in body-local coordinates (origin at body
// center, +y down), with its texture-map source region. Untextured parts
// (the head) render as plain white and never carry the adversarial pattern.
struct BodyPart {
  std::string name;
  double x0, y0, x1, y1;      // body-local rect
  double ux0, uy0, ux1, uy1;  // texture-map source rect, pixel coords
  bool textured = true;
  int swing_group = 0;  // 0 none, +1/-1 opposite-phase limb pairs
};

struct BodyModel {
  std::vector<BodyPart> parts;

  // Articulated figure sized for a given sensor: head + torso + two arms +
  // two legs. UV layout: torso upper-left, arms upper-right, legs bottom.
  static BodyModel humanoid(int texture_size) {
    double T = static_cast<double>(texture_size);
    BodyModel m;
    // body-local extents roughly 16 wide x 30 tall at scale 1
    m.parts.push_back({"head", -3, -15, 3, -10, 0, 0, 0, 0, false, 0});
    m.parts.push_back({"upper_body", -6, -10, 6, 1, 0, 0, 0.6 * T, 0.5 * T, true, 0});
    m.parts.push_back({"arm_l", -9, -9, -6, 0, 0.6 * T, 0, 0.8 * T, 0.5 * T, true, +1});
    m.parts.push_back({"arm_r", 6, -9, 9, 0, 0.8 * T, 0, T, 0.5 * T, true, -1});
    m.parts.push_back({"leg_l", -5, 1, -1, 15, 0, 0.5 * T, 0.5 * T, T, true, -1});
    m.parts.push_back({"leg_r", 1, 1, 5, 15, 0.5 * T, 0.5 * T, T, T, true, +1});
    return m;
  }

  // Rigid non-pedestrian object (board/sign): a single textured rectangle of
  // roughly pedestrian footprint, no articulation, UV covering the whole map.
  // Used as the negative class when training the detector.
  static BodyModel board(int texture_size) {
    double T = static_cast<double>(texture_size);
    BodyModel m;
    m.parts.push_back({"board", -8, -12, 8, 12, 0, 0, T, T, true, 0});
    return m;
  }

  // Mask regions named after the paper's body-part groups, in texture-map
  // pixel coordinates. The head has no texture region and is never masked in.
  std::vector<MaskRegion> mask_regions(int texture_size,
                                       const std::vector<std::string>& groups) const {
    double T = static_cast<double>(texture_size);
    std::vector<MaskRegion> out;
    for (const auto& g : groups) {
      if (g == "upper_body")
        out.push_back({g, 0, 0, static_cast<int>(0.6 * T), static_cast<int>(0.5 * T)});
      else if (g == "arms")
        out.push_back({g, static_cast<int>(0.6 * T), 0, static_cast<int>(T),
                       static_cast<int>(0.5 * T)});
      else if (g == "legs")
        out.push_back({g, 0, static_cast<int>(0.5 * T), static_cast<int>(T),
                       static_cast<int>(T)});
      else
        throw std::invalid_argument("unknown mask group: " + g);
    }
    return out;
  }
};

struct Pose {
  double tx = 0, ty = 0;   // body center in sensor pixels
  double rot = 0;          // radians
  double scale = 1.0;
  double swing = 0.0;      // limb swing offset in body-local units
};

struct Trajectory {
  std::vector<Pose> poses;
  std::vector<uint64_t> times_us;
};

struct BackgroundSpec {
  enum class Kind { constant, stripes } kind = Kind::constant;
  double base = 0.5;
  double stripe_amp = 0.2;
  int stripe_period = 8;    // pixels
  double stripe_speed = 2;  // pixels per frame
};

struct FrameSequence {
  std::vector<ad::DiffTensor> frames;  // each (H, W), values in [kEpsLum, 1]
  std::vector<uint64_t> times_us;
  int height = 0;
  int width = 0;
};

inline Trajectory make_trajectory(const std::string& kind, int n_frames, uint64_t seed, int width,
                                  int height, uint64_t frame_dt_us = 10'000) {
  if (n_frames < 2) throw std::invalid_argument("make_trajectory: need at least 2 frames");
  Rng rng(seed);
  Trajectory tr;
  tr.poses.resize(static_cast<size_t>(n_frames));
  tr.times_us.resize(static_cast<size_t>(n_frames));
  double cx = width / 2.0, cy = height / 2.0;
  double phase0 = rng.uniform(0.0, 6.28318530717958648);
  for (int k = 0; k < n_frames; ++k) {
    double f = n_frames > 1 ? static_cast<double>(k) / (n_frames - 1) : 0.0;
    Pose& p = tr.poses[static_cast<size_t>(k)];
    if (kind == "walk_across") {
      p.tx = 0.38 * width + 0.24 * width * f;
      p.ty = cy;
      p.scale = 1.0;
      p.swing = 2.0 * std::sin(phase0 + 6.28318530717958648 * f);
    } else if (kind == "bob") {
      p.tx = cx;
      p.ty = cy + 0.08 * height * std::sin(phase0 + 6.28318530717958648 * f);
      p.scale = 1.0;
      p.swing = 1.0 * std::sin(phase0 + 3.14159265358979324 * f);
    } else if (kind == "approach") {
      // spans the three declared scale presets {0.5, 1.0, 1.5}
      p.tx = cx;
      p.ty = cy;
      p.scale = 0.5 + 1.0 * f;
      p.swing = 1.5 * std::sin(phase0 + 6.28318530717958648 * f);
    } else {
      throw std::invalid_argument("unknown trajectory preset: " + kind);
    }
    tr.times_us[static_cast<size_t>(k)] = static_cast<uint64_t>(k) * frame_dt_us;
  }
  return tr;
}

// Per-sequence pose jitter: +-10% scale, +-5 px translation (config default).
inline Trajectory jitter_trajectory(Trajectory tr, Rng& rng, double scale_jitter = 0.1,
                                    double trans_jitter = 5.0) {
  double ds = rng.uniform(1.0 - scale_jitter, 1.0 + scale_jitter);
  double dx = rng.uniform(-trans_jitter, trans_jitter);
  double dy = rng.uniform(-trans_jitter, trans_jitter);
  for (Pose& p : tr.poses) {
    p.scale *= ds;
    p.tx += dx;
    p.ty += dy;
  }
  return tr;
}

namespace detail {

inline double background_at(const BackgroundSpec& bg, int x, int /*y*/, int frame_idx) {
  if (bg.kind == BackgroundSpec::Kind::constant) return bg.base;
  double phase = x + bg.stripe_speed * frame_idx;
  int band = static_cast<int>(std::floor(phase / bg.stripe_period));
  return bg.base + ((band % 2 + 2) % 2 == 0 ? bg.stripe_amp : -bg.stripe_amp);
}

// Part-local horizontal articulation offset.
inline double swing_offset(const BodyPart& part, const Pose& pose) {
  return pose.swing * part.swing_group;
}

}  // namespace detail

// Renders one frame by compositing the textured parts over the background.
// Differentiable w.r.t. the texture map only; pose and coverage are treated
// as constants. Edge pixels alpha-blend over a 1-pixel band.
inline ad::DiffTensor render_frame(const ad::DiffTensor& tex_map, const BodyModel& body,
                                   const Pose& pose, const BackgroundSpec& bg, int width,
                                   int height, int frame_idx) {
  if (pose.scale <= 0.0)
    throw geometry_error("render_frame: degenerate pose, scale must be positive");
  std::vector<double> bg_img(static_cast<size_t>(height) * width);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      bg_img[static_cast<size_t>(y) * width + x] =
          std::clamp(detail::background_at(bg, x, y, frame_idx), kEpsLum, 1.0);
  ad::DiffTensor frame = ad::constant({height * width}, bg_img);

  const double c = std::cos(pose.rot), s = std::sin(pose.rot);
  for (const BodyPart& part : body.parts) {
    double off = detail::swing_offset(part, pose);
    // bounding box of the transformed part, padded for the AA band
    double minx = 1e30, miny = 1e30, maxx = -1e30, maxy = -1e30;
    for (double lx : {part.x0 + off, part.x1 + off})
      for (double ly : {part.y0, part.y1}) {
        double sx = pose.tx + pose.scale * (c * lx - s * ly);
        double sy = pose.ty + pose.scale * (s * lx + c * ly);
        minx = std::min(minx, sx);
        maxx = std::max(maxx, sx);
        miny = std::min(miny, sy);
        maxy = std::max(maxy, sy);
      }
    int px0 = std::max(0, static_cast<int>(std::floor(minx - 1)));
    int px1 = std::min(width - 1, static_cast<int>(std::ceil(maxx + 1)));
    int py0 = std::max(0, static_cast<int>(std::floor(miny - 1)));
    int py1 = std::min(height - 1, static_cast<int>(std::ceil(maxy + 1)));
    if (px0 > px1 || py0 > py1) continue;

    std::vector<int> pix;
    std::vector<double> us, vs, alphas;
    for (int py = py0; py <= py1; ++py)
      for (int px = px0; px <= px1; ++px) {
        // sensor -> body-local
        double dx = (px - pose.tx) / pose.scale;
        double dy = (py - pose.ty) / pose.scale;
        double lx = c * dx + s * dy - off;
        double ly = -s * dx + c * dy;
        double d = std::min(std::min(lx - part.x0, part.x1 - lx),
                            std::min(ly - part.y0, part.y1 - ly));
        double alpha = std::clamp(d * pose.scale + 0.5, 0.0, 1.0);
        if (alpha <= 0.0) continue;
        pix.push_back(py * width + px);
        alphas.push_back(alpha);
        if (part.textured) {
          double fu = (lx - part.x0) / (part.x1 - part.x0);
          double fv = (ly - part.y0) / (part.y1 - part.y0);
          us.push_back(part.ux0 + fu * (part.ux1 - part.ux0) - 0.5);
          vs.push_back(part.uy0 + fv * (part.uy1 - part.uy0) - 0.5);
        }
      }
    if (pix.empty()) continue;

    ad::DiffTensor intensity;
    if (part.textured) {
      ad::DiffTensor samp = ad::bilinear_sample(tex_map, us, vs);
      intensity = ad::affine(samp, 1.0 - kEpsLum, kEpsLum);
    } else {
      intensity = ad::constant_fill({static_cast<int>(pix.size())}, 1.0);
    }
    // over-blend against the current composite (not the raw background) so
    // overlapping AA seams between parts stay a convex combination in [eps, 1]
    ad::DiffTensor current = ad::gather(frame, pix);
    ad::DiffTensor delta = ad::mul(ad::sub(intensity, current),
                                   ad::constant({static_cast<int>(pix.size())}, alphas));
    frame = ad::add(frame, ad::scatter_add(delta, pix, {height * width}));
  }
  return ad::reshape(frame, {height, width});
}

inline FrameSequence render_frames(const ad::DiffTensor& tex_map, const BodyModel& body,
                                   const Trajectory& traj, const BackgroundSpec& bg, int width,
                                   int height) {
  FrameSequence seq;
  seq.width = width;
  seq.height = height;
  seq.times_us = traj.times_us;
  for (size_t k = 0; k < traj.poses.size(); ++k)
    seq.frames.push_back(render_frame(tex_map, body, traj.poses[k], bg, width, height,
                                      static_cast<int>(k)));
  return seq;
}

// Tight box over all body parts under the frame's pose, clipped to the
// sensor. Exact geometry, no learning involved.
inline Box ground_truth_box(const BodyModel& body, const Pose& pose, int width, int height) {
  double minx = 1e30, miny = 1e30, maxx = -1e30, maxy = -1e30;
  const double c = std::cos(pose.rot), s = std::sin(pose.rot);
  for (const BodyPart& part : body.parts) {
    double off = detail::swing_offset(part, pose);
    for (double lx : {part.x0 + off, part.x1 + off})
      for (double ly : {part.y0, part.y1}) {
        double sx = pose.tx + pose.scale * (c * lx - s * ly);
        double sy = pose.ty + pose.scale * (s * lx + c * ly);
        minx = std::min(minx, sx);
        maxx = std::max(maxx, sx);
        miny = std::min(miny, sy);
        maxy = std::max(maxy, sy);
      }
  }
  minx = std::max(minx, 0.0);
  miny = std::max(miny, 0.0);
  maxx = std::min(maxx, static_cast<double>(width));
  maxy = std::min(maxy, static_cast<double>(height));
  if (minx >= maxx || miny >= maxy) return Box{};  // fully out of frame
  return Box::of(minx, miny, maxx, maxy);
}

inline std::vector<Box> ground_truth_boxes(const BodyModel& body, const Trajectory& traj,
                                           int width, int height) {
  std::vector<Box> out;
  for (const Pose& p : traj.poses) out.push_back(ground_truth_box(body, p, width, height));
  return out;
}

}  // namespace evtex
