#pragma once

#include <string>
#include <vector>

#include "evtex/render.hpp"
#include "evtex/texture.hpp"
#include "evtex/util.hpp"

namespace evtex {

// Synthetic stand-ins for the motion-capture trials: deterministic scene
// specs with disjoint train/test seed ranges.
struct SceneSpec {
  int id = 0;
  std::string preset;       // trajectory preset name
  uint64_t seed = 0;
  std::string scale_class;  // small | medium | large
  int n_frames = 4;
  std::string split;        // train | test
};

inline double scale_class_factor(const std::string& scale_class) {
  if (scale_class == "small") return 0.7;
  if (scale_class == "medium") return 1.0;
  if (scale_class == "large") return 1.3;
  throw std::invalid_argument("unknown scale class: " + scale_class);
}

inline std::vector<SceneSpec> generate_split(int count_train, int count_test, uint64_t seed,
                                             int n_frames = 4) {
  if (count_train < 1 || count_test < 1)
    throw std::invalid_argument("generate_split: counts must be >= 1");
  const std::vector<std::string> presets = {"walk_across", "bob", "approach"};
  const std::vector<std::string> scales = {"small", "medium", "large"};
  std::vector<SceneSpec> out;
  Rng rng(seed);
  // train seeds in [seed*1e6, ...), test seeds offset by 2^32: disjoint ranges
  for (int i = 0; i < count_train; ++i) {
    SceneSpec s;
    s.id = i;
    s.preset = presets[static_cast<size_t>(rng.below(presets.size()))];
    s.scale_class = scales[static_cast<size_t>(rng.below(scales.size()))];
    s.seed = seed * 1'000'000 + static_cast<uint64_t>(i);
    s.n_frames = n_frames;
    s.split = "train";
    out.push_back(s);
  }
  for (int i = 0; i < count_test; ++i) {
    SceneSpec s;
    s.id = count_train + i;
    s.preset = presets[static_cast<size_t>(i) % presets.size()];
    // scale classes balanced across the test split
    s.scale_class = scales[static_cast<size_t>(i) % scales.size()];
    s.seed = seed * 1'000'000 + (1ull << 32) + static_cast<uint64_t>(i);
    s.n_frames = n_frames;
    s.split = "test";
    out.push_back(s);
  }
  return out;
}

inline Trajectory scene_trajectory(const SceneSpec& spec, int width, int height) {
  Trajectory tr = make_trajectory(spec.preset, spec.n_frames, spec.seed, width, height);
  double f = scale_class_factor(spec.scale_class);
  for (Pose& p : tr.poses) p.scale *= f;
  return tr;
}

// Baseline texture maps for comparison: all-white, all-black, and fair-coin
// random blocks. Returned pre-mask; apply_mask still forces masked-out
// regions white.
struct BaselineTextures {
  std::vector<double> white, black, random;
  int size = 0;  // H = W = n*c
};

inline BaselineTextures baseline_textures(int n, int c, uint64_t seed) {
  if (n < 1 || c < 1) throw std::invalid_argument("baseline_textures: invalid geometry");
  const int T = n * c;
  BaselineTextures out;
  out.size = T;
  size_t npix = static_cast<size_t>(T) * T;
  out.white.assign(npix, 1.0);
  out.black.assign(npix, 0.0);
  out.random.resize(npix);
  Rng rng(seed);
  std::vector<double> cells(static_cast<size_t>(n) * n);
  for (auto& v : cells) v = rng.below(2) ? 1.0 : 0.0;
  for (int y = 0; y < T; ++y)
    for (int x = 0; x < T; ++x)
      out.random[static_cast<size_t>(y) * T + x] = cells[static_cast<size_t>(y / c) * n + x / c];
  return out;
}

// Striped texture on the cell lattice: alternating black/white bands of
// `period` cells, horizontal or vertical, shifted by `phase` cells. The
// texture of the board/sign negative class.
inline std::vector<double> striped_texture(int n, int c, int period, bool horizontal,
                                           int phase = 0) {
  if (n < 1 || c < 1 || period < 1)
    throw std::invalid_argument("striped_texture: invalid geometry");
  const int T = n * c;
  std::vector<double> out(static_cast<size_t>(T) * T);
  for (int y = 0; y < T; ++y)
    for (int x = 0; x < T; ++x) {
      int cell = (horizontal ? y : x) / c + phase;
      out[static_cast<size_t>(y) * T + x] = (cell / period) % 2 ? 0.0 : 1.0;
    }
  return out;
}

}  // namespace evtex
