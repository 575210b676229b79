#pragma once

#include <algorithm>
#include <stdexcept>

namespace evtex {

// Axis-aligned box in pixel coordinates, half-open-agnostic (continuous).
struct Box {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  bool empty = true;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return empty ? 0.0 : (x1 - x0) * (y1 - y0); }

  static Box of(double x0, double y0, double x1, double y1) { return Box{x0, y0, x1, y1, false}; }
};

inline double iou(const Box& a, const Box& b) {
  if (a.empty || b.empty) return 0.0;
  double ix0 = std::max(a.x0, b.x0);
  double iy0 = std::max(a.y0, b.y0);
  double ix1 = std::min(a.x1, b.x1);
  double iy1 = std::min(a.y1, b.y1);
  double iw = std::max(0.0, ix1 - ix0);
  double ih = std::max(0.0, iy1 - iy0);
  double inter = iw * ih;
  double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

}  // namespace evtex
