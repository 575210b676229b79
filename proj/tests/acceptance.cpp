// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Heavier end-to-end checks (detector gate, attack efficacy,
// ablation, determinism) share one trained detector and report wall time.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "evtex/attack.hpp"
#include "evtex/detector_train.hpp"
#include "evtex/eval.hpp"
#include "evtex/v2e.hpp"

using namespace evtex;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int criterion, const char* name, bool ok, const std::string& detail = "") {
  std::printf("%s  criterion %d: %s%s%s\n", ok ? "PASS" : "FAIL", criterion, name,
              detail.empty() ? "" : " — ", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

FrameSequence random_sequence(uint64_t seed, int h, int w, int n_frames) {
  Rng rng(seed);
  FrameSequence seq;
  seq.width = w;
  seq.height = h;
  for (int k = 0; k < n_frames; ++k) {
    std::vector<double> f(static_cast<size_t>(h) * w);
    for (double& v : f) v = rng.uniform(kEpsLum, 1.0);
    seq.frames.push_back(ad::constant({h, w}, f));
    seq.times_us.push_back(static_cast<uint64_t>(k) * 10'000);
  }
  return seq;
}

// ---- criteria 1 & 2: V2E oracle equivalence + conservation ---------------

void criterion_1_and_2() {
  auto t0 = Clock::now();
  bool equal = true;
  bool conserved = true;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    const int H = 16, W = 16, N = 10;
    FrameSequence seq = random_sequence(seed, H, W, N);
    std::vector<std::vector<double>> raw;
    for (const auto& f : seq.frames) raw.push_back(f.v);
    V2EOptions opt{0.2, 10, false};
    V2EResult fast = v2e_sequence(seq, opt);
    V2EOracleResult oracle = v2e_oracle(raw, seq.times_us, W, H, opt.theta);
    for (size_t k = 0; k + 1 < static_cast<size_t>(N); ++k)
      for (size_t i = 0; i < static_cast<size_t>(H) * W; ++i) {
        if (fast.intervals[k].n_pos.v[i] != static_cast<double>(oracle.pos_counts[k][i]) ||
            fast.intervals[k].n_neg.v[i] != static_cast<double>(oracle.neg_counts[k][i]))
          equal = false;
      }
    // conservation: per pixel, sum(Np - Nn) telescopes to S_final - S_1 = S_final
    for (size_t i = 0; i < static_cast<size_t>(H) * W; ++i) {
      double net = 0.0;
      for (const auto& m : fast.intervals) net += m.n_pos.v[i] - m.n_neg.v[i];
      // independent sequential recurrence for S_final
      double ref = std::log(raw[0][i]), s_prev = 0.0, r = 0.0;
      for (size_t k = 1; k < raw.size(); ++k) {
        double a = (std::log(raw[k][i]) - ref) / opt.theta + r;
        double s = std::floor(a);
        r = a - s;
        s_prev = s;
      }
      if (net != s_prev) conserved = false;
    }
  }
  double dt = seconds_since(t0);
  char buf[96];
  std::snprintf(buf, sizeof buf, "100 random 16x16x10 sequences, %.1f s (budget 30 s)", dt);
  report(1, "V2E oracle equivalence", equal && dt < 30.0, buf);
  report(2, "event conservation telescoping", conserved);
}

// ---- criterion 3: end-to-end gradient fidelity ----------------------------

void criterion_3() {
  auto t0 = Clock::now();

  // each smooth primitive individually < 1e-6
  Rng rng(11);
  double prim_worst = 0.0;
  auto prim = [&](const std::function<ad::DiffTensor(ad::Tape&, const ad::DiffTensor&)>& f,
                  std::vector<double> x0) {
    prim_worst = std::max(
        prim_worst, ad::finite_diff_check(f, {static_cast<int>(x0.size())}, std::move(x0)));
  };
  std::vector<double> x6(6);
  for (double& v : x6) v = rng.uniform(0.2, 2.0);
  prim([](ad::Tape&, const ad::DiffTensor& x) { return ad::sum(ad::mul(x, x)); }, x6);
  prim([](ad::Tape&, const ad::DiffTensor& x) { return ad::sum(ad::log(x)); }, x6);
  prim([](ad::Tape&, const ad::DiffTensor& x) { return ad::sum(ad::exp(x)); }, x6);
  prim([](ad::Tape&, const ad::DiffTensor& x) { return ad::sum(ad::sigmoid(x)); }, x6);
  prim([](ad::Tape&, const ad::DiffTensor& x) { return ad::sum(ad::softplus(x)); }, x6);
  prim([](ad::Tape&, const ad::DiffTensor& x) { return ad::mean(ad::div(x, ad::affine(x, 2.0, 1.0))); },
       x6);

  // end-to-end dL_adv/dz on a 4x4 grid, 8x8 sensor, 3 frames, soft mode
  const int n = 4, c = 2, T = n * c, W = 8, H = 8, bins = 3;
  BodyModel body = BodyModel::humanoid(T);
  BodyMask mask = BodyMask::from_regions(T, T, body.mask_regions(T, {"upper_body", "arms", "legs"}));
  Trajectory tr;
  for (int k = 0; k < 3; ++k) {
    Pose p;
    p.tx = 4.0 + 0.4 * k;
    p.ty = 4.0;
    p.scale = 0.22;
    p.swing = 0.5 * k;
    tr.poses.push_back(p);
    tr.times_us.push_back(static_cast<uint64_t>(k) * 10'000);
  }
  DetectorParams det = DetectorParams::init(bins, W, 5);
  Box gt = ground_truth_box(body, tr.poses[0], W, H);
  std::vector<double> z0(n * n);
  for (double& v : z0) v = rng.uniform(-0.5, 0.5);

  double e2e = ad::finite_diff_check(
      [&](ad::Tape& tape, const ad::DiffTensor& zflat) {
        ad::DiffTensor z = ad::reshape(zflat, {n, n});
        ad::DiffTensor tex = texture_map(z, BinarizeOptions{false, 0.5}, c, mask);
        FrameSequence frames = render_frames(tex, body, tr, BackgroundSpec{}, W, H);
        V2EResult res = v2e_sequence(frames, V2EOptions{0.2, bins, true});
        RawGrid raw = detector_forward(res.tensor, det);
        raw.stride = det.stride();
        return adv_loss({raw}, {gt}, 10'000.0, 10'000.0).l_adv;
      },
      {n * n}, z0);

  double dt = seconds_since(t0);
  char buf[128];
  std::snprintf(buf, sizeof buf, "primitives %.2e (<1e-6), end-to-end %.2e (<1e-3), %.1f s",
                prim_worst, e2e, dt);
  report(3, "gradient fidelity", prim_worst < 1e-6 && e2e < 1e-3 && dt < 120.0, buf);
}

// ---- criterion 4: STE contract --------------------------------------------

void criterion_4() {
  bool ok = true;
  // hard binarize output binary, strict boundary u = 0.5 -> 0
  {
    ad::Tape tape;
    ad::DiffTensor u = tape.var({5}, {0.0, 0.4999, 0.5, 0.5001, 1.0});
    ad::DiffTensor b = binarize(u, BinarizeOptions{true, 1.0});
    ok = ok && b.v[0] == 0.0 && b.v[1] == 0.0 && b.v[2] == 0.0 && b.v[3] == 1.0 && b.v[4] == 1.0;
    tape.backward(ad::sum(b));
    for (double g : tape.grad(u.node)) ok = ok && g == 1.0;  // identity Jacobian
  }
  {
    ad::Tape tape;
    ad::DiffTensor x = tape.var({4}, {-1.7, -0.2, 0.3, 2.9});
    ad::DiffTensor f = ad::ste_floor(x);
    ok = ok && f.v[0] == -2.0 && f.v[1] == -1.0 && f.v[2] == 0.0 && f.v[3] == 2.0;
    tape.backward(ad::sum(f));
    for (double g : tape.grad(x.node)) ok = ok && g == 1.0;
  }
  report(4, "STE contract (binary forward, identity backward, strict 0.5)", ok);
}

// ---- criterion 5: metric oracles -------------------------------------------

double ap_oracle(const std::vector<std::vector<Detection>>& per_seq_dets,
                 const std::vector<Box>& per_seq_gt) {
  int n_gt = 0;
  for (const Box& b : per_seq_gt)
    if (!b.empty) ++n_gt;
  struct Scored {
    double conf;
    size_t seq;
    const Detection* det;
  };
  std::vector<Scored> all;
  for (size_t s = 0; s < per_seq_dets.size(); ++s)
    for (const Detection& d : per_seq_dets[s]) all.push_back({d.conf(), s, &d});
  std::stable_sort(all.begin(), all.end(),
                   [](const Scored& a, const Scored& b) { return a.conf > b.conf; });
  std::vector<bool> matched(per_seq_gt.size(), false);
  std::vector<bool> is_tp(all.size(), false);
  std::vector<double> prec(all.size(), 0.0);
  int tp = 0;
  for (size_t i = 0; i < all.size(); ++i) {
    const Scored& s = all[i];
    if (!per_seq_gt[s.seq].empty && !matched[s.seq] && iou(s.det->box, per_seq_gt[s.seq]) >= 0.5) {
      matched[s.seq] = true;
      is_tp[i] = true;
      ++tp;
    }
    prec[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
  }
  for (size_t i = all.size(); i-- > 1;) prec[i - 1] = std::max(prec[i - 1], prec[i]);
  double sum = 0.0;
  for (size_t i = 0; i < all.size(); ++i)
    if (is_tp[i]) sum += prec[i];
  return n_gt > 0 ? sum / n_gt : 0.0;
}

void criterion_5() {
  Rng rng(3);
  bool ok = true;
  double worst = 0.0;
  int checked = 0;
  while (checked < 1000) {
    size_t n_seq = 1 + rng.below(6);
    std::vector<Box> gts;
    std::vector<std::vector<Detection>> dets(n_seq);
    int n_gt = 0;
    for (size_t s = 0; s < n_seq; ++s) {
      if (rng.below(5) == 0) {
        gts.push_back(Box{});
      } else {
        double x = rng.uniform(0, 40), y = rng.uniform(0, 40);
        gts.push_back(Box::of(x, y, x + rng.uniform(4, 16), y + rng.uniform(4, 16)));
        ++n_gt;
      }
      size_t n_det = rng.below(5);
      for (size_t d = 0; d < n_det; ++d) {
        double x = rng.uniform(0, 40), y = rng.uniform(0, 40);
        if (!gts[s].empty && rng.below(2)) {
          x = gts[s].x0 + rng.uniform(-3, 3);
          y = gts[s].y0 + rng.uniform(-3, 3);
        }
        Detection det;
        det.obj = rng.below(10) / 10.0;  // quantized confs force rank ties
        det.cls = rng.below(10) / 10.0;
        det.box = Box::of(x, y, x + rng.uniform(4, 16), y + rng.uniform(4, 16));
        dets[s].push_back(det);
      }
    }
    if (n_gt == 0) continue;
    ++checked;
    auto ap = compute_ap(dets, gts);
    if (!ap) {
      ok = false;
      continue;
    }
    worst = std::max(worst, std::abs(*ap - ap_oracle(dets, gts)));
  }
  ok = ok && worst < 1e-9;

  // SeqASR exactness
  ok = ok && compute_seqasr({true, true, false, false}) == 0.5;
  ok = ok && compute_seqasr({false, false, false}) == 1.0;
  ok = ok && compute_seqasr({true}) == 0.0;

  char buf[96];
  std::snprintf(buf, sizeof buf, "1000 randomized AP cases, worst |diff| %.2e (<1e-9)", worst);
  report(5, "metric oracles", ok, buf);
}

// ---- criteria 6-9: detector gate, attack, ablation, determinism -----------

struct EvalOutcome {
  std::vector<std::optional<double>> ap;  // per threshold
  std::vector<double> seqasr;
  std::vector<int> n_detected;
};

EvalOutcome evaluate(const std::vector<double>& texture, const BodyMask& mask,
                     const BodyModel& body, const std::vector<SceneSpec>& scenes,
                     const DetectorParams& det, int T, int width, int height,
                     const V2EOptions& opt) {
  BackgroundSpec bg;
  std::vector<RawGrid> grids;
  std::vector<Box> gts;
  for (const SceneSpec& s : scenes) {
    EvalScene es = build_eval_scene(texture, T, mask, s, body, bg, width, height, opt);
    grids.push_back(detector_forward(es.event_tensor, det));
    gts.push_back(es.gt);
  }
  EvalOutcome out;
  for (double thr : kEvalThresholds) {
    std::vector<std::vector<Detection>> dets;
    std::vector<bool> detected;
    for (size_t i = 0; i < grids.size(); ++i) {
      dets.push_back(decode(grids[i], thr));
      detected.push_back(sequence_detected(dets.back(), gts[i]));
    }
    out.ap.push_back(compute_ap(dets, gts));
    out.seqasr.push_back(compute_seqasr(detected));
    int n = 0;
    for (bool d : detected)
      if (d) ++n;
    out.n_detected.push_back(n);
  }
  return out;
}

void criteria_6_to_9() {
  const uint64_t kSeed = 2026;
  SurrogateTrainConfig tcfg;

  // ---- criterion 6: surrogate detector gate
  auto t0 = Clock::now();
  DetectorParams det;
  SurrogateTrainReport trep;
  bool trained = true;
  std::string detail;
  try {
    det = train_surrogate(tcfg, kSeed, &trep);
    double dt = seconds_since(t0);
    char buf[160];
    std::snprintf(buf, sizeof buf, "held-out AP %.3f (>=0.9), empty-scene FP %.3f (<=0.05), %.0f s (budget 900 s)",
                  trep.held_out_ap, trep.empty_scene_fp_rate, dt);
    detail = buf;
    trained = trep.held_out_ap >= 0.9 && trep.empty_scene_fp_rate <= 0.05 && dt < 900.0;
  } catch (const std::exception& e) {
    trained = false;
    detail = e.what();
  }
  report(6, "surrogate detector gate", trained, detail);
  if (!trained) {
    report(7, "attack efficacy", false, "skipped: no trained detector");
    report(8, "ablation trend", false, "skipped: no trained detector");
    report(9, "determinism", false, "skipped: no trained detector");
    return;
  }

  const int T = tcfg.texture_n * tcfg.texture_c;
  BodyModel body = BodyModel::humanoid(T);
  V2EOptions v2e_opt{tcfg.theta, tcfg.bins, false};
  std::vector<SceneSpec> eval_scenes;
  for (const SceneSpec& s : generate_split(1, 12, kSeed + 500, tcfg.n_frames))
    if (s.split == "test") eval_scenes.push_back(s);

  // desk-preset attack operating point (mirrors configs/desk.toml)
  AttackConfig acfg;
  acfg.iterations = 2'000;
  acfg.lr = 0.065;
  acfg.n_scenes = 12;
  acfg.schedule.anneal_frac = 0.0;  // hard/STE from the start
  acfg.seed = kSeed + 1;

  // ---- criterion 7: attack efficacy on the desk preset
  t0 = Clock::now();
  AttackResult full_run = run_attack(acfg, det);
  double attack_dt = seconds_since(t0);

  BodyMask full_mask = BodyMask::from_regions(
      T, T, body.mask_regions(T, {"upper_body", "arms", "legs"}));
  BaselineTextures base = baseline_textures(tcfg.texture_n, tcfg.texture_c, kSeed + 17);
  EvalOutcome adv = evaluate(full_run.final_texture, full_mask, body, eval_scenes, det, T,
                             tcfg.width, tcfg.height, v2e_opt);
  EvalOutcome white = evaluate(base.white, full_mask, body, eval_scenes, det, T, tcfg.width,
                               tcfg.height, v2e_opt);

  double l0 = full_run.trace.records.front().l_adv;
  double l1 = full_run.trace.records.back().l_adv;
  bool halved = l1 <= 0.5 * l0;
  double adv_asr = adv.seqasr[3], white_asr = white.seqasr[3];  // threshold 0.25
  bool asr_ok = adv_asr >= 0.5 && white_asr <= 0.1;
  bool ap_ok = true;
  for (size_t i = 0; i < 4; ++i) {
    double a = adv.ap[i] ? *adv.ap[i] : 0.0;
    double w = white.ap[i] ? *white.ap[i] : 0.0;
    if (!(a < w)) ap_ok = false;
  }
  {
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "L_adv %.0f->%.0f (halved=%d), SeqASR@0.25 adv %.2f (>=0.5) white %.2f (<=0.1), "
                  "AP adv<white at all 4 thresholds=%d, %.0f s (budget 1800 s)",
                  l0, l1, halved ? 1 : 0, adv_asr, white_asr, ap_ok ? 1 : 0, attack_dt);
    report(7, "attack efficacy", halved && asr_ok && ap_ok && attack_dt < 1800.0, buf);
  }

  // threshold monotonicity of detected-count N across the sweep (criterion 5 rider)
  {
    bool mono = true;
    for (size_t i = 1; i < 4; ++i)
      if (white.n_detected[i] > white.n_detected[i - 1] ||
          adv.n_detected[i] > adv.n_detected[i - 1])
        mono = false;
    if (!mono) report(5, "threshold monotonicity of N on eval runs", false);
  }

  // ---- criterion 8: ablation trend, single-part masks vs full body
  double best_single = 0.0;
  std::string parts_detail;
  for (const char* group : {"upper_body", "arms", "legs"}) {
    AttackConfig pcfg = acfg;
    pcfg.mask_groups = {group};
    AttackResult part_run = run_attack(pcfg, det);
    BodyMask part_mask = BodyMask::from_regions(T, T, body.mask_regions(T, {group}));
    EvalOutcome part = evaluate(part_run.final_texture, part_mask, body, eval_scenes, det, T,
                                tcfg.width, tcfg.height, v2e_opt);
    best_single = std::max(best_single, part.seqasr[3]);
    char buf[48];
    std::snprintf(buf, sizeof buf, "%s %.2f ", group, part.seqasr[3]);
    parts_detail += buf;
  }
  {
    char buf[160];
    std::snprintf(buf, sizeof buf, "full-body %.2f >= max(single %s) - 0.05", adv_asr,
                  parts_detail.c_str());
    report(8, "ablation trend", adv_asr >= best_single - 0.05, buf);
  }

  // ---- criterion 9: bit-identical reruns + frozen detector hash
  AttackResult rerun = run_attack(acfg, det);
  bool identical = rerun.final_texture == full_run.final_texture &&
                   rerun.latent.z == full_run.latent.z &&
                   rerun.trace.to_csv() == full_run.trace.to_csv();
  bool hash_ok = full_run.detector_hash_before == full_run.detector_hash_after &&
                 rerun.detector_hash_after == full_run.detector_hash_before &&
                 det.hash() == full_run.detector_hash_before;
  report(9, "determinism and frozen detector", identical && hash_ok);
}

}  // namespace

int main() {
  auto t0 = Clock::now();
  criterion_1_and_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criteria_6_to_9();
  std::printf("%s (%.0f s total)\n", g_failures == 0 ? "ALL CRITERIA PASS" : "CRITERIA FAILED",
              seconds_since(t0));
  return g_failures == 0 ? 0 : 1;
}
