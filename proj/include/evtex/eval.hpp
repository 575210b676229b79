#pragma once

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "evtex/box.hpp"
#include "evtex/detector.hpp"
#include "evtex/scenario.hpp"
#include "evtex/v2e.hpp"

namespace evtex {

// All-point interpolated AP at a single IoU threshold (default 0.5). One
// ground-truth box per sequence; empty boxes mean no target there. Returns
// nullopt (undefined-metric marker) when there is no ground truth at all.
inline std::optional<double> compute_ap(const std::vector<std::vector<Detection>>& per_seq_dets,
                                        const std::vector<Box>& per_seq_gt,
                                        double iou_threshold = 0.5) {
  if (per_seq_dets.size() != per_seq_gt.size())
    throw std::invalid_argument("compute_ap: detections/gt sequence count mismatch");
  int n_gt = 0;
  for (const Box& b : per_seq_gt)
    if (!b.empty) ++n_gt;
  if (n_gt == 0) return std::nullopt;

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

  std::vector<bool> gt_matched(per_seq_gt.size(), false);
  double ap = 0.0;
  int tp = 0, fp = 0;
  std::vector<std::pair<double, double>> pr;  // (recall, precision)
  for (const Scored& s : all) {
    bool matched = !per_seq_gt[s.seq].empty && !gt_matched[s.seq] &&
                   iou(s.det->box, per_seq_gt[s.seq]) >= iou_threshold;
    if (matched) {
      gt_matched[s.seq] = true;
      ++tp;
    } else {
      ++fp;
    }
    pr.emplace_back(static_cast<double>(tp) / n_gt,
                    static_cast<double>(tp) / static_cast<double>(tp + fp));
  }
  // precision envelope over recall
  double prev_recall = 0.0;
  for (size_t i = 0; i < pr.size(); ++i) {
    double max_prec = 0.0;
    for (size_t j = i; j < pr.size(); ++j) max_prec = std::max(max_prec, pr[j].second);
    if (pr[i].first > prev_recall) {
      ap += (pr[i].first - prev_recall) * max_prec;
      prev_recall = pr[i].first;
    }
  }
  return ap;
}

// A sequence counts as detected iff some decoded detection matches its
// ground truth at IoU >= 0.5 at the operating threshold.
inline bool sequence_detected(const std::vector<Detection>& dets, const Box& gt,
                              double iou_threshold = 0.5) {
  if (gt.empty) return false;
  for (const Detection& d : dets)
    if (iou(d.box, gt) >= iou_threshold) return true;
  return false;
}

inline double compute_seqasr(const std::vector<bool>& detected) {
  if (detected.empty()) throw std::invalid_argument("compute_seqasr: M must be >= 1");
  int n = 0;
  for (bool d : detected)
    if (d) ++n;
  return 1.0 - static_cast<double>(n) / static_cast<double>(detected.size());
}

struct EvalRow {
  std::string texture_id;
  double threshold = 0;
  std::optional<double> ap;
  double seqasr = 0;
  int sequences = 0;          // M
  int detected_sequences = 0;  // N
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::string detector_hash;
  std::string header = "AP: single-IoU 0.5, all-point interpolation";

  std::string to_csv() const {
    std::ostringstream os;
    os << "# " << header << "; detector " << detector_hash << "\n";
    os << "texture,threshold,ap,seqasr,M,N\n";
    for (const auto& r : rows) {
      os << r.texture_id << ',' << r.threshold << ',';
      if (r.ap)
        os << *r.ap;
      else
        os << "undefined";
      os << ',' << r.seqasr << ',' << r.sequences << ',' << r.detected_sequences << "\n";
    }
    return os.str();
  }

  std::string to_table() const {
    std::ostringstream os;
    os << header << "  (detector " << detector_hash << ")\n";
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-24s %10s %10s %10s %6s %6s\n", "texture", "threshold", "AP",
                  "SeqASR", "M", "N");
    os << buf;
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof buf, "%-24s %10.3f %10s %10.3f %6d %6d\n", r.texture_id.c_str(),
                    r.threshold, r.ap ? std::to_string(*r.ap).substr(0, 6).c_str() : "undef",
                    r.seqasr, r.sequences, r.detected_sequences);
      os << buf;
    }
    return os.str();
  }
};

constexpr double kEvalThresholds[4] = {0.001, 0.01, 0.1, 0.25};

struct EvalScene {
  ad::DiffTensor event_tensor;  // constant (2B, H, W)
  Box gt;                       // sequence-level ground truth
};

// Renders a scene with a fixed (constant) texture and converts to events.
// The sequence ground truth is the union of the per-frame boxes.
inline EvalScene build_eval_scene(const std::vector<double>& texture, int texture_size,
                                  const BodyMask& mask, const SceneSpec& spec,
                                  const BodyModel& body, const BackgroundSpec& bg, int width,
                                  int height, const V2EOptions& v2e_opt, bool with_body = true) {
  ad::DiffTensor tex = ad::constant({texture_size, texture_size}, texture);
  ad::DiffTensor masked = apply_mask(tex, mask);
  Trajectory tr = scene_trajectory(spec, width, height);
  BodyModel empty_body;
  const BodyModel& b = with_body ? body : empty_body;
  FrameSequence frames = render_frames(masked, b, tr, bg, width, height);
  EvalScene out;
  out.event_tensor = v2e_sequence(frames, v2e_opt).tensor;
  if (with_body) {
    Box u{};
    for (const Box& fb : ground_truth_boxes(body, tr, width, height)) {
      if (fb.empty) continue;
      if (u.empty)
        u = fb;
      else
        u = Box::of(std::min(u.x0, fb.x0), std::min(u.y0, fb.y0), std::max(u.x1, fb.x1),
                    std::max(u.y1, fb.y1));
    }
    out.gt = u;
  }
  return out;
}

// Evaluates one texture over a fixed scene set at every threshold.
inline std::vector<EvalRow> evaluate_texture(const std::string& texture_id,
                                             const std::vector<EvalScene>& scenes,
                                             const DetectorParams& det) {
  std::vector<std::vector<Detection>> raw_dets;  // decoded at a tiny floor threshold
  std::vector<Box> gts;
  std::vector<RawGrid> grids;
  for (const EvalScene& sc : scenes) {
    grids.push_back(detector_forward(sc.event_tensor, det));
    gts.push_back(sc.gt);
  }
  std::vector<EvalRow> rows;
  for (double thr : kEvalThresholds) {
    std::vector<std::vector<Detection>> dets;
    std::vector<bool> detected;
    for (size_t i = 0; i < grids.size(); ++i) {
      dets.push_back(decode(grids[i], thr));
      detected.push_back(sequence_detected(dets.back(), gts[i]));
    }
    EvalRow row;
    row.texture_id = texture_id;
    row.threshold = thr;
    row.ap = compute_ap(dets, gts);
    row.seqasr = compute_seqasr(detected);
    row.sequences = static_cast<int>(detected.size());
    row.detected_sequences = 0;
    for (bool d : detected)
      if (d) ++row.detected_sequences;
    rows.push_back(row);
  }
  return rows;
}

// Full cross product of textures x thresholds on a held-out scene set.
inline EvalReport sweep(const std::vector<std::pair<std::string, std::vector<double>>>& textures,
                        int texture_size, const BodyMask& mask,
                        const std::vector<SceneSpec>& scenes, const BodyModel& body,
                        const BackgroundSpec& bg, int width, int height,
                        const V2EOptions& v2e_opt, const DetectorParams& det) {
  EvalReport report;
  report.detector_hash = hex64(det.hash());
  for (const auto& [id, tex] : textures) {
    std::vector<EvalScene> sc;
    for (const SceneSpec& s : scenes)
      sc.push_back(build_eval_scene(tex, texture_size, mask, s, body, bg, width, height,
                                    v2e_opt));
    for (EvalRow& row : evaluate_texture(id, sc, det)) report.rows.push_back(row);
  }
  return report;
}

}  // namespace evtex
