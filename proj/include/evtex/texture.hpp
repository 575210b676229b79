#pragma once

#include <map>
#include <string>
#include <vector>

#include "evtex/autodiff.hpp"
#include "evtex/util.hpp"

namespace evtex {

// Learnable n x n latent grid. sigmoid(z) is the grayscale texture grid, so
// the default init z = +4 starts near white with nonzero gradient.
struct LatentGrid {
  int n = 0;
  std::vector<double> z;

  static LatentGrid white_init(int n, double z0 = 4.0) {
    return LatentGrid{n, std::vector<double>(static_cast<size_t>(n) * n, z0)};
  }
};

struct BinarizeOptions {
  bool hard = false;
  double temperature = 1.0;
};

// Named axis-aligned rectangle in texture-map pixel coordinates.
struct MaskRegion {
  std::string name;
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open [x0,x1) x [y0,y1)
};

// H x W indicator map built as the union (max) of named regions.
struct BodyMask {
  int height = 0;
  int width = 0;
  std::vector<double> m;  // entries in {0,1}

  static BodyMask from_regions(int height, int width, const std::vector<MaskRegion>& regions) {
    BodyMask out;
    out.height = height;
    out.width = width;
    out.m.assign(static_cast<size_t>(height) * width, 0.0);
    for (const auto& r : regions)
      for (int y = std::max(0, r.y0); y < std::min(height, r.y1); ++y)
        for (int x = std::max(0, r.x0); x < std::min(width, r.x1); ++x)
          out.m[static_cast<size_t>(y) * width + x] = 1.0;
    return out;
  }

  static BodyMask full(int height, int width) {
    BodyMask out;
    out.height = height;
    out.width = width;
    out.m.assign(static_cast<size_t>(height) * width, 1.0);
    return out;
  }
};

// z -> grayscale grid u in [0,1].
inline ad::DiffTensor generate_texture_grid(ad::Tape& tape, const LatentGrid& grid) {
  ad::DiffTensor z = tape.var({grid.n, grid.n}, grid.z);
  return ad::sigmoid(z);
}

inline ad::DiffTensor generate_texture_grid(const ad::DiffTensor& z) { return ad::sigmoid(z); }

// Hard mode: exact threshold at 0.5 (strict) with straight-through backward.
// Soft mode: sigmoid((u - 0.5) / temperature), converging pointwise to the
// hard function away from u = 0.5 as temperature -> 0.
inline ad::DiffTensor binarize(const ad::DiffTensor& u, const BinarizeOptions& opt) {
  if (opt.temperature <= 0.0) throw std::invalid_argument("binarize: temperature must be > 0");
  if (opt.hard) return ad::ste_threshold(u);
  return ad::sigmoid(ad::affine(u, 1.0 / opt.temperature, -0.5 / opt.temperature));
}

// Nearest-neighbor block expansion by factor c.
inline ad::DiffTensor upsample_texture(const ad::DiffTensor& u_b, int c) {
  return ad::upsample_nearest(u_b, c);
}

// Masked-out pixels are forced exactly white: U~ = M*U + (1-M)*1.
inline ad::DiffTensor apply_mask(const ad::DiffTensor& u_map, const BodyMask& mask) {
  if (u_map.shape != std::vector<int>{mask.height, mask.width})
    throw std::invalid_argument("apply_mask: texture/mask shape mismatch");
  ad::DiffTensor m = ad::constant({mask.height, mask.width}, mask.m);
  std::vector<double> inv(mask.m.size());
  for (size_t i = 0; i < inv.size(); ++i) inv[i] = 1.0 - mask.m[i];
  ad::DiffTensor one_minus_m = ad::constant({mask.height, mask.width}, inv);
  return ad::add(ad::mul(m, u_map), one_minus_m);
}

// Full texture pipeline: latent -> grid -> binarize -> upsample -> mask.
inline ad::DiffTensor texture_map(const ad::DiffTensor& z, const BinarizeOptions& opt, int c,
                                  const BodyMask& mask) {
  return apply_mask(upsample_texture(binarize(generate_texture_grid(z), opt), c), mask);
}

// Geometric anneal from temp_start to temp_end over the first `anneal_frac`
// of the run, then hard mode.
struct TemperatureSchedule {
  double temp_start = 1.0;
  double temp_end = 0.02;
  double anneal_frac = 0.8;

  BinarizeOptions at(int iter, int total_iters) const {
    int soft_iters = static_cast<int>(anneal_frac * total_iters);
    if (iter >= soft_iters || soft_iters <= 1) return BinarizeOptions{true, temp_end};
    double f = static_cast<double>(iter) / (soft_iters - 1);
    double temp = temp_start * std::pow(temp_end / temp_start, f);
    return BinarizeOptions{false, temp};
  }
};

inline void export_texture_pgm(const std::string& path, const ad::DiffTensor& u_map) {
  if (u_map.shape.size() != 2) throw std::invalid_argument("export_texture_pgm: expected 2-D");
  write_pgm(path, u_map.v, u_map.shape[1], u_map.shape[0]);
}

}  // namespace evtex
