#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

namespace evtex {

// One brightness-change event: pixel, microsecond timestamp, polarity sign.
struct Event {
  uint16_t x = 0;
  uint16_t y = 0;
  uint64_t t = 0;
  int8_t p = 1;  // +1 or -1

  friend bool operator==(const Event&, const Event&) = default;
};

struct EventStream {
  std::vector<Event> events;
  uint16_t width = 0;
  uint16_t height = 0;
  uint64_t t_start = 0;
  uint64_t t_end = 0;  // half-open interval [t_start, t_end)

  friend bool operator==(const EventStream&, const EventStream&) = default;
};

// Binned counts over (polarity, time bin, y, x). Polarity index 0 is
// positive, 1 is negative.
struct EventTensor {
  std::vector<uint32_t> counts;
  int bins = 0;
  int height = 0;
  int width = 0;

  uint32_t& at(int p_index, int tau, int y, int x) {
    return counts[((static_cast<size_t>(p_index) * bins + tau) * height + y) * width + x];
  }
  uint32_t at(int p_index, int tau, int y, int x) const {
    return counts[((static_cast<size_t>(p_index) * bins + tau) * height + y) * width + x];
  }
  uint64_t total() const {
    uint64_t s = 0;
    for (uint32_t c : counts) s += c;
    return s;
  }
};

struct invalid_geometry_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct invalid_event_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Bin index per the half-open interval convention: tau = floor((t - t1) /
// (t2 - t1) * B), computed in exact integer arithmetic, clamped to B-1.
inline int bin_index(uint64_t t, uint64_t t_start, uint64_t t_end, int B) {
  unsigned __int128 num = static_cast<unsigned __int128>(t - t_start) * static_cast<unsigned>(B);
  uint64_t tau = static_cast<uint64_t>(num / (t_end - t_start));
  if (tau >= static_cast<uint64_t>(B)) tau = static_cast<uint64_t>(B) - 1;
  return static_cast<int>(tau);
}

inline EventTensor bin_events(const EventStream& stream, int B) {
  if (B < 1) throw std::invalid_argument("bin_events: B must be >= 1");
  if (stream.t_start >= stream.t_end)
    throw invalid_geometry_error("bin_events: empty interval, t_start >= t_end");
  EventTensor out;
  out.bins = B;
  out.height = stream.height;
  out.width = stream.width;
  out.counts.assign(2ull * B * stream.height * stream.width, 0);
  for (const Event& e : stream.events) {
    int tau = bin_index(e.t, stream.t_start, stream.t_end, B);
    int p_index = e.p > 0 ? 0 : 1;
    ++out.at(p_index, tau, e.y, e.x);
  }
  return out;
}

// Sorts by (t, y, x, p) and checks all stream invariants. Idempotent.
inline EventStream validate_sort(EventStream stream) {
  for (size_t i = 0; i < stream.events.size(); ++i) {
    const Event& e = stream.events[i];
    if (e.x >= stream.width || e.y >= stream.height)
      throw invalid_event_error("event " + std::to_string(i) + ": coordinates (" +
                                std::to_string(e.x) + "," + std::to_string(e.y) +
                                ") outside sensor " + std::to_string(stream.width) + "x" +
                                std::to_string(stream.height));
    if (e.p != 1 && e.p != -1)
      throw invalid_event_error("event " + std::to_string(i) + ": polarity must be +1 or -1");
    if (e.t < stream.t_start || e.t >= stream.t_end)
      throw invalid_event_error("event " + std::to_string(i) + ": timestamp " +
                                std::to_string(e.t) + " outside [" +
                                std::to_string(stream.t_start) + "," +
                                std::to_string(stream.t_end) + ")");
  }
  std::stable_sort(stream.events.begin(), stream.events.end(),
                   [](const Event& a, const Event& b) {
                     return std::tie(a.t, a.y, a.x, a.p) < std::tie(b.t, b.y, b.x, b.p);
                   });
  return stream;
}

}  // namespace evtex
