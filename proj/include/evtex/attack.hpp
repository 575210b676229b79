#pragma once

#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "evtex/adam.hpp"
#include "evtex/detector.hpp"
#include "evtex/eval.hpp"
#include "evtex/render.hpp"
#include "evtex/scenario.hpp"
#include "evtex/texture.hpp"
#include "evtex/v2e.hpp"

namespace evtex {

struct AttackConfig {
  double lambda1 = 10'000.0;
  double lambda2 = 10'000.0;
  double lr = 1e-4;
  int iterations = 11'500;  // desk preset: 2'000
  int batch = 1;            // sequences per step (gradient accumulation)
  TemperatureSchedule schedule;
  uint64_t seed = 0;
  std::vector<std::string> mask_groups = {"upper_body", "arms", "legs"};
  int grid_n = 10;
  int block_c = 6;
  int width = 64;
  int height = 64;
  int bins = 10;
  double theta = kDefaultContrastThreshold;
  int n_frames = 4;
  int n_scenes = 8;  // training trajectories cycled through with jitter
  int snapshot_every = 0;
  double scale_jitter = 0.1;
  double trans_jitter = 5.0;
  // Optimize through the smooth V2E surrogate (real-valued counts) so the
  // loss stays continuous in the latent during the soft-binarization phase;
  // the emitted texture and all reported metrics still use the exact
  // integer event pipeline.
  bool smooth_v2e = true;
  bool verbose = false;
};

struct AttackLosses {
  ad::DiffTensor l_obj;
  ad::DiffTensor l_cls;
  ad::DiffTensor l_adv;
};

// Eq-style adversarial loss: per sequence, take the max objectness / class
// probability over cells whose decoded box overlaps the ground truth
// (IoU > 0); if no cell overlaps, fall back to the global max so the
// gradient never stalls. Averages over the M sequences, then
// L_adv = lambda1 * L_obj + lambda2 * L_cls.
inline AttackLosses adv_loss(const std::vector<RawGrid>& raw_grids, const std::vector<Box>& gts,
                             double lambda1, double lambda2) {
  if (raw_grids.empty()) throw std::invalid_argument("adv_loss: empty grid list");
  if (raw_grids.size() != gts.size())
    throw std::invalid_argument("adv_loss: grid/ground-truth count mismatch");
  ad::DiffTensor obj_sum = ad::constant_scalar(0.0);
  ad::DiffTensor cls_sum = ad::constant_scalar(0.0);
  for (size_t s = 0; s < raw_grids.size(); ++s) {
    const RawGrid& raw = raw_grids[s];
    std::vector<int> cells;
    for (int gy = 0; gy < raw.gh; ++gy)
      for (int gx = 0; gx < raw.gw; ++gx)
        if (iou(decode_cell_box(raw, gy, gx), gts[s]) > 0.0) cells.push_back(gy * raw.gw + gx);
    ad::DiffTensor obj_flat = ad::reshape(raw.obj, {raw.gh * raw.gw});
    ad::DiffTensor cls_flat = ad::reshape(raw.cls, {raw.gh * raw.gw});
    ad::DiffTensor obj_max =
        cells.empty() ? ad::max(obj_flat) : ad::max(ad::gather(obj_flat, cells));
    ad::DiffTensor cls_max =
        cells.empty() ? ad::max(cls_flat) : ad::max(ad::gather(cls_flat, cells));
    obj_sum = ad::add(obj_sum, obj_max);
    cls_sum = ad::add(cls_sum, cls_max);
  }
  const double inv_m = 1.0 / static_cast<double>(raw_grids.size());
  AttackLosses out;
  out.l_obj = ad::affine(obj_sum, inv_m, 0.0);
  out.l_cls = ad::affine(cls_sum, inv_m, 0.0);
  out.l_adv = ad::add(ad::affine(out.l_obj, lambda1, 0.0), ad::affine(out.l_cls, lambda2, 0.0));
  return out;
}

struct AttackTraceRecord {
  int iteration = 0;
  double l_obj = 0;
  double l_cls = 0;
  double l_adv = 0;
  double temperature = 0;
  bool hard = false;
};

struct AttackTrace {
  std::vector<AttackTraceRecord> records;

  std::string to_csv() const {
    std::string out = "iteration,l_obj,l_cls,l_adv,temperature,hard\n";
    char buf[128];
    for (const auto& r : records) {
      std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.6g,%d\n", r.iteration, r.l_obj, r.l_cls,
                    r.l_adv, r.temperature, r.hard ? 1 : 0);
      out += buf;
    }
    return out;
  }
};

struct AttackResult {
  LatentGrid latent;
  std::vector<double> final_texture;  // hard-binarized, masked, T x T
  int texture_size = 0;
  AttackTrace trace;
  uint64_t detector_hash_before = 0;
  uint64_t detector_hash_after = 0;
};

// Latent grid container, EVDT-style layout: magic, version, n, then
// little-endian 64-bit floats.
inline void save_latent(const std::string& path, const LatentGrid& grid) {
  std::string out = "EVLZ";
  out.push_back(1);
  out.push_back(0);
  out.push_back(static_cast<char>(grid.n & 0xff));
  out.push_back(static_cast<char>(grid.n >> 8));
  size_t off = out.size();
  out.resize(off + grid.z.size() * 8);
  std::memcpy(out.data() + off, grid.z.data(), grid.z.size() * 8);
  write_file(path, out);
}

inline LatentGrid load_latent(const std::string& path) {
  std::string data = read_file(path);
  if (data.size() < 8 || data.compare(0, 4, "EVLZ") != 0)
    throw std::runtime_error(path + ": not a latent grid file");
  int n = static_cast<unsigned char>(data[6]) | (static_cast<unsigned char>(data[7]) << 8);
  LatentGrid g;
  g.n = n;
  g.z.resize(static_cast<size_t>(n) * n);
  if (data.size() < 8 + g.z.size() * 8) throw std::runtime_error(path + ": truncated");
  std::memcpy(g.z.data(), data.data() + 8, g.z.size() * 8);
  return g;
}

// End-to-end optimization loop of Fig-2 shape: texture -> render -> V2E ->
// frozen detector -> adversarial loss -> Adam on the latent grid.
inline AttackResult run_attack(const AttackConfig& cfg, const DetectorParams& detector,
                               std::function<void(int, const AttackResult&)> snapshot_cb = {}) {
  if (!detector.frozen) throw std::invalid_argument("run_attack: detector must be frozen");
  if (cfg.iterations < 1) throw std::invalid_argument("run_attack: iterations must be >= 1");
  const int T = cfg.grid_n * cfg.block_c;
  BodyModel body = BodyModel::humanoid(T);
  BodyMask mask = cfg.mask_groups.empty()
                      ? BodyMask::from_regions(T, T, {})
                      : BodyMask::from_regions(T, T, body.mask_regions(T, cfg.mask_groups));
  BackgroundSpec bg;
  V2EOptions v2e_opt{cfg.theta, cfg.bins, cfg.smooth_v2e};

  std::vector<Trajectory> trajectories;
  {
    std::vector<SceneSpec> scenes = generate_split(cfg.n_scenes, 1, cfg.seed, cfg.n_frames);
    for (int i = 0; i < cfg.n_scenes; ++i)
      trajectories.push_back(scene_trajectory(scenes[static_cast<size_t>(i)], cfg.width,
                                              cfg.height));
  }

  AttackResult result;
  result.detector_hash_before = detector.hash();
  result.latent = LatentGrid::white_init(cfg.grid_n);
  AdamState adam = AdamState::init(result.latent.z.size());
  Rng jitter_rng(cfg.seed + 99);

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    BinarizeOptions bin_opt = cfg.schedule.at(iter, cfg.iterations);
    ad::Tape tape;
    ad::DiffTensor z = tape.var({cfg.grid_n, cfg.grid_n}, result.latent.z);
    ad::DiffTensor tex = texture_map(z, bin_opt, cfg.block_c, mask);

    std::vector<RawGrid> grids;
    std::vector<Box> gts;
    for (int b = 0; b < cfg.batch; ++b) {
      size_t scene_idx = static_cast<size_t>((iter * cfg.batch + b) %
                                             static_cast<int>(trajectories.size()));
      Trajectory tr =
          jitter_trajectory(trajectories[scene_idx], jitter_rng, cfg.scale_jitter,
                            cfg.trans_jitter);
      FrameSequence frames = render_frames(tex, body, tr, bg, cfg.width, cfg.height);
      V2EResult ev = v2e_sequence(frames, v2e_opt);
      RawGrid raw = detector_forward(ev.tensor, detector);
      raw.stride = detector.stride();
      grids.push_back(std::move(raw));
      Box u{};
      for (const Box& fb : ground_truth_boxes(body, tr, cfg.width, cfg.height)) {
        if (fb.empty) continue;
        u = u.empty ? fb
                    : Box::of(std::min(u.x0, fb.x0), std::min(u.y0, fb.y0),
                              std::max(u.x1, fb.x1), std::max(u.y1, fb.y1));
      }
      gts.push_back(u);
    }

    AttackLosses losses = adv_loss(grids, gts, cfg.lambda1, cfg.lambda2);
    try {
      tape.backward(losses.l_adv);
      adam_step(result.latent.z, tape.grad(z.node), adam, cfg.lr);
    } catch (const numeric_error& e) {
      throw numeric_error(std::string(e.what()) + " at iteration " + std::to_string(iter));
    }

    AttackTraceRecord rec;
    rec.iteration = iter;
    rec.l_obj = losses.l_obj.scalar();
    rec.l_cls = losses.l_cls.scalar();
    rec.l_adv = losses.l_adv.scalar();
    rec.temperature = bin_opt.temperature;
    rec.hard = bin_opt.hard;
    result.trace.records.push_back(rec);
    if (cfg.verbose && (iter % 100 == 0 || iter + 1 == cfg.iterations))
      std::fprintf(stderr, "attack iter %d: L_adv %.2f (obj %.4f cls %.4f, %s)\n", iter,
                   rec.l_adv, rec.l_obj, rec.l_cls, rec.hard ? "hard" : "soft");
    if (cfg.snapshot_every > 0 && snapshot_cb && (iter + 1) % cfg.snapshot_every == 0)
      snapshot_cb(iter + 1, result);
  }

  // final hard-binarized masked texture
  {
    ad::Tape tape;
    ad::DiffTensor z = tape.var({cfg.grid_n, cfg.grid_n}, result.latent.z);
    ad::DiffTensor tex = texture_map(z, BinarizeOptions{true, 1.0}, cfg.block_c, mask);
    result.final_texture = tex.v;
    result.texture_size = T;
  }
  result.detector_hash_after = detector.hash();
  return result;
}

}  // namespace evtex
