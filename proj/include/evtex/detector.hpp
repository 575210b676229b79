#pragma once

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "evtex/autodiff.hpp"
#include "evtex/box.hpp"
#include "evtex/events.hpp"
#include "evtex/util.hpp"

namespace evtex {

struct Detection {
  Box box;
  double obj = 0;
  double cls = 0;
  double conf() const { return obj * cls; }
};

// Frozen single-class event detector: 3 stride-2 conv stages over the
// (2*B)-channel collapsed event tensor, then 1x1 objectness / class / box
// heads on the stride-8 grid.
struct DetectorLayer {
  std::string name;
  std::vector<int> shape;
  std::vector<double> w;
};

struct DetectorParams {
  int bins = 10;
  int input_size = 64;
  bool frozen = false;
  std::vector<DetectorLayer> layers;

  static constexpr int kStages = 3;
  static constexpr int kChannels[4] = {0, 16, 32, 64};  // [0] filled from bins

  int stride() const { return 8; }
  int grid() const { return input_size / stride(); }

  const DetectorLayer& layer(const std::string& name) const {
    for (const auto& l : layers)
      if (l.name == name) return l;
    throw std::invalid_argument("no such detector layer: " + name);
  }

  static DetectorParams init(int bins, int input_size, uint64_t seed) {
    DetectorParams p;
    p.bins = bins;
    p.input_size = input_size;
    Rng rng(seed);
    int chans[4] = {2 * bins, 16, 32, 64};
    auto add = [&](const std::string& name, std::vector<int> shape, double scale) {
      DetectorLayer l;
      l.name = name;
      l.shape = std::move(shape);
      l.w.resize(static_cast<size_t>(ad::shape_size(l.shape)));
      for (auto& v : l.w) v = scale * rng.normal();
      p.layers.push_back(std::move(l));
    };
    for (int s = 0; s < kStages; ++s) {
      int ci = chans[s], co = chans[s + 1];
      double scale = std::sqrt(2.0 / (ci * 9.0));
      add("conv" + std::to_string(s + 1) + "_w", {co, ci, 3, 3}, scale);
      add("conv" + std::to_string(s + 1) + "_b", {co}, 0.0);
    }
    double head_scale = std::sqrt(2.0 / 64.0);
    add("obj_w", {1, 64, 1, 1}, head_scale);
    add("obj_b", {1}, 0.0);
    add("cls_w", {1, 64, 1, 1}, head_scale);
    add("cls_b", {1}, 0.0);
    add("box_w", {4, 64, 1, 1}, head_scale);
    add("box_b", {4}, 0.0);
    return p;
  }

  std::string serialize() const {
    std::string out = "EVDT";
    auto put16 = [&](uint16_t v) {
      out.push_back(static_cast<char>(v & 0xff));
      out.push_back(static_cast<char>(v >> 8));
    };
    put16(1);  // version
    put16(static_cast<uint16_t>(bins));
    put16(static_cast<uint16_t>(input_size));
    put16(static_cast<uint16_t>(layers.size()));
    for (const auto& l : layers) {
      put16(static_cast<uint16_t>(l.name.size()));
      out += l.name;
      put16(static_cast<uint16_t>(l.shape.size()));
      for (int d : l.shape) put16(static_cast<uint16_t>(d));
      size_t off = out.size();
      out.resize(off + l.w.size() * 8);
      std::memcpy(out.data() + off, l.w.data(), l.w.size() * 8);
    }
    return out;
  }

  static DetectorParams deserialize(const std::string& data) {
    size_t pos = 0;
    auto need = [&](size_t n) {
      if (pos + n > data.size()) throw std::runtime_error("EVDT: truncated at byte " +
                                                          std::to_string(pos));
    };
    need(4);
    if (data.compare(0, 4, "EVDT") != 0) throw std::runtime_error("EVDT: bad magic");
    pos = 4;
    auto get16 = [&]() {
      need(2);
      uint16_t v = static_cast<uint16_t>(static_cast<unsigned char>(data[pos]) |
                                         (static_cast<unsigned char>(data[pos + 1]) << 8));
      pos += 2;
      return v;
    };
    uint16_t version = get16();
    if (version != 1) throw std::runtime_error("EVDT: unsupported version");
    DetectorParams p;
    p.bins = get16();
    p.input_size = get16();
    uint16_t nlayers = get16();
    for (uint16_t i = 0; i < nlayers; ++i) {
      DetectorLayer l;
      uint16_t nl = get16();
      need(nl);
      l.name = data.substr(pos, nl);
      pos += nl;
      uint16_t nd = get16();
      for (uint16_t d = 0; d < nd; ++d) l.shape.push_back(get16());
      size_t n = static_cast<size_t>(ad::shape_size(l.shape));
      need(n * 8);
      l.w.resize(n);
      std::memcpy(l.w.data(), data.data() + pos, n * 8);
      pos += n * 8;
      p.layers.push_back(std::move(l));
    }
    p.frozen = true;
    return p;
  }

  uint64_t hash() const { return fnv1a64(serialize()); }

  void save(const std::string& path) const { write_file(path, serialize()); }
  static DetectorParams load(const std::string& path) { return deserialize(read_file(path)); }
};

// Pre-decoding detector output on the stride-8 feature grid.
struct RawGrid {
  ad::DiffTensor obj_logit;  // (GH, GW)
  ad::DiffTensor cls_logit;  // (GH, GW)
  ad::DiffTensor obj;        // sigmoid(obj_logit)
  ad::DiffTensor cls;
  ad::DiffTensor box;  // (4, GH, GW) nonnegative l,t,r,b offsets in pixels
  int stride = 8;
  int gh = 0, gw = 0;
};

namespace detail {

// Materializes params as tape variables (training) or constants (frozen use).
struct ParamTensors {
  std::vector<ad::DiffTensor> t;
  std::vector<std::string> names;

  static ParamTensors make(const DetectorParams& p, ad::Tape* tape) {
    ParamTensors out;
    for (const auto& l : p.layers) {
      out.names.push_back(l.name);
      out.t.push_back(tape ? tape->var(l.shape, l.w) : ad::constant(l.shape, l.w));
    }
    return out;
  }

  const ad::DiffTensor& get(const std::string& name) const {
    for (size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return t[i];
    throw std::invalid_argument("no such param tensor: " + name);
  }
};

}  // namespace detail

// Forward pass. E is the (2*B, H, W) event tensor; gradients flow back into
// it when it is tracked. Deterministic and pure.
inline RawGrid detector_forward(const ad::DiffTensor& E, const detail::ParamTensors& p) {
  ad::DiffTensor x = E;
  for (int s = 1; s <= DetectorParams::kStages; ++s) {
    x = ad::half_rectify(ad::conv2d(x, p.get("conv" + std::to_string(s) + "_w"),
                                    p.get("conv" + std::to_string(s) + "_b"), 2, 1));
  }
  RawGrid out;
  out.gh = x.shape[1];
  out.gw = x.shape[2];
  ad::DiffTensor obj = ad::conv2d(x, p.get("obj_w"), p.get("obj_b"), 1, 0);
  ad::DiffTensor cls = ad::conv2d(x, p.get("cls_w"), p.get("cls_b"), 1, 0);
  ad::DiffTensor box = ad::conv2d(x, p.get("box_w"), p.get("box_b"), 1, 0);
  out.obj_logit = ad::reshape(obj, {out.gh, out.gw});
  out.cls_logit = ad::reshape(cls, {out.gh, out.gw});
  out.obj = ad::sigmoid(out.obj_logit);
  out.cls = ad::sigmoid(out.cls_logit);
  // offsets in pixels, kept positive via softplus and scaled by the stride
  out.box = ad::affine(ad::softplus(box), 8.0, 0.0);
  return out;
}

inline RawGrid detector_forward(const ad::DiffTensor& E, const DetectorParams& params,
                                ad::Tape* param_tape = nullptr) {
  if (E.shape.size() != 3 || E.shape[0] != 2 * params.bins)
    throw std::invalid_argument("detector_forward: expected " + std::to_string(2 * params.bins) +
                                " channels, got " +
                                (E.shape.empty() ? std::string("scalar")
                                                 : std::to_string(E.shape[0])));
  return detector_forward(E, detail::ParamTensors::make(params, param_tape));
}

inline Box decode_cell_box(const RawGrid& raw, int gy, int gx) {
  double cx = (gx + 0.5) * raw.stride;
  double cy = (gy + 0.5) * raw.stride;
  size_t cell = static_cast<size_t>(gy) * raw.gw + gx;
  size_t plane = static_cast<size_t>(raw.gh) * raw.gw;
  double l = raw.box.v[cell], t = raw.box.v[plane + cell];
  double r = raw.box.v[2 * plane + cell], b = raw.box.v[3 * plane + cell];
  return Box::of(cx - l, cy - t, cx + r, cy + b);
}

// Threshold on obj*cls then greedy NMS at IoU 0.5.
inline std::vector<Detection> decode(const RawGrid& raw, double conf_threshold,
                                     double nms_iou = 0.5) {
  if (conf_threshold <= 0.0 || conf_threshold >= 1.0)
    throw std::invalid_argument("decode: conf_threshold must be in (0,1)");
  std::vector<Detection> cands;
  for (int gy = 0; gy < raw.gh; ++gy)
    for (int gx = 0; gx < raw.gw; ++gx) {
      size_t cell = static_cast<size_t>(gy) * raw.gw + gx;
      Detection d;
      d.obj = raw.obj.v[cell];
      d.cls = raw.cls.v[cell];
      if (d.conf() <= conf_threshold) continue;
      d.box = decode_cell_box(raw, gy, gx);
      if (d.box.width() <= 0 || d.box.height() <= 0) continue;
      cands.push_back(d);
    }
  std::sort(cands.begin(), cands.end(),
            [](const Detection& a, const Detection& b) { return a.conf() > b.conf(); });
  std::vector<Detection> kept;
  for (const Detection& d : cands) {
    bool suppressed = false;
    for (const Detection& k : kept)
      if (iou(d.box, k.box) > nms_iou) {
        suppressed = true;
        break;
      }
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

}  // namespace evtex
