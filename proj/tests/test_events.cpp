#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "evtex/event_io.hpp"
#include "evtex/events.hpp"
#include "evtex/util.hpp"

using namespace evtex;

namespace {

EventStream random_stream(uint64_t seed, int n, uint16_t w = 16, uint16_t h = 16,
                          uint64_t t_end = 1000) {
  Rng rng(seed);
  EventStream s;
  s.width = w;
  s.height = h;
  s.t_start = 0;
  s.t_end = t_end;
  for (int i = 0; i < n; ++i) {
    Event e;
    e.x = static_cast<uint16_t>(rng.below(w));
    e.y = static_cast<uint16_t>(rng.below(h));
    e.t = rng.below(t_end);
    e.p = rng.below(2) ? 1 : -1;
    s.events.push_back(e);
  }
  return validate_sort(s);
}

std::string tmp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("empty stream bins to an all-zero tensor") {
  EventStream s;
  s.width = 16;
  s.height = 16;
  s.t_start = 0;
  s.t_end = 100;
  EventTensor t = bin_events(s, 10);
  CHECK(t.counts.size() == 2u * 10 * 16 * 16);
  CHECK(t.total() == 0);
}

TEST_CASE("single event lands in the arithmetic bin") {
  EventStream s;
  s.width = 16;
  s.height = 16;
  s.t_start = 0;
  s.t_end = 100;
  s.events.push_back(Event{3, 5, 50, +1});
  EventTensor t = bin_events(s, 10);
  CHECK(t.at(0, 5, 5, 3) == 1);
  CHECK(t.total() == 1);
}

TEST_CASE("binning conserves the event count") {
  EventStream s = random_stream(42, 1000);
  EventTensor t = bin_events(s, 10);
  CHECK(t.total() == 1000);
}

TEST_CASE("upper boundary bin clamps to B-1") {
  EventStream s;
  s.width = 4;
  s.height = 4;
  s.t_start = 0;
  s.t_end = 100;
  s.events.push_back(Event{0, 0, 99, +1});
  EventTensor t = bin_events(s, 10);
  CHECK(t.at(0, 9, 0, 0) == 1);
}

TEST_CASE("empty interval is an invalid-geometry error") {
  EventStream s;
  s.width = 4;
  s.height = 4;
  s.t_start = 5;
  s.t_end = 5;
  CHECK_THROWS_AS(bin_events(s, 10), invalid_geometry_error);
}

TEST_CASE("polarity partition: per-polarity slice equals substream binning") {
  EventStream s = random_stream(7, 500);
  EventTensor whole = bin_events(s, 8);
  EventStream pos = s, neg = s;
  pos.events.erase(std::remove_if(pos.events.begin(), pos.events.end(),
                                  [](const Event& e) { return e.p < 0; }),
                   pos.events.end());
  neg.events.erase(std::remove_if(neg.events.begin(), neg.events.end(),
                                  [](const Event& e) { return e.p > 0; }),
                   neg.events.end());
  EventTensor tp = bin_events(pos, 8), tn = bin_events(neg, 8);
  for (int b = 0; b < 8; ++b)
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) {
        CHECK(whole.at(0, b, y, x) == tp.at(0, b, y, x));
        CHECK(whole.at(1, b, y, x) == tn.at(1, b, y, x));
      }
}

TEST_CASE("bin monotonicity in time") {
  EventStream s;
  s.width = 4;
  s.height = 4;
  s.t_start = 0;
  s.t_end = 997;
  int prev = -1;
  for (uint64_t t = 0; t < 997; t += 13) {
    int tau = bin_index(t, 0, 997, 10);
    CHECK(tau >= prev);
    prev = tau;
  }
}

TEST_CASE("validate_sort is idempotent and orders by (t, y, x, p)") {
  EventStream s;
  s.width = 8;
  s.height = 8;
  s.t_start = 0;
  s.t_end = 100;
  s.events = {Event{1, 1, 50, +1}, Event{2, 2, 10, -1}};
  EventStream sorted = validate_sort(s);
  CHECK(sorted.events[0].t == 10);
  CHECK(validate_sort(sorted) == sorted);
}

TEST_CASE("out-of-range coordinate names the offending index") {
  EventStream s;
  s.width = 8;
  s.height = 8;
  s.t_start = 0;
  s.t_end = 100;
  s.events = {Event{1, 1, 5, +1}, Event{8, 0, 6, +1}};
  CHECK_THROWS_WITH_AS(validate_sort(s), doctest::Contains("event 1"), invalid_event_error);
}

TEST_CASE("binary round trip preserves events and geometry") {
  EventStream s = random_stream(3, 200);
  std::string path = tmp_path("evtex_rt.evtx");
  write_events_binary(path, s);
  EventStream r = read_events_binary(path);
  CHECK(r.events == s.events);
  CHECK(r.width == s.width);
  CHECK(r.height == s.height);
  std::remove(path.c_str());
}

TEST_CASE("text and binary writes of one stream re-read equal") {
  EventStream s = random_stream(9, 150);
  std::string pb = tmp_path("evtex_b.evtx"), pt = tmp_path("evtex_t.csv");
  write_events_binary(pb, s);
  write_events_text(pt, s);
  EventStream rb = read_events(pb), rt = read_events(pt);
  CHECK(rb.events == rt.events);
  CHECK(rb.width == rt.width);
  std::remove(pb.c_str());
  std::remove(pt.c_str());
}

TEST_CASE("bad magic bytes raise a format error") {
  std::string path = tmp_path("evtex_bad.evtx");
  write_file(path, "NOPE0000000000000000");
  CHECK_THROWS_AS(read_events_binary(path), format_error);
  std::remove(path.c_str());
}

TEST_CASE("truncated record reports a byte offset") {
  EventStream s = random_stream(11, 3);
  std::string path = tmp_path("evtex_trunc.evtx");
  write_events_binary(path, s);
  std::string data = read_file(path);
  write_file(path, data.substr(0, data.size() - 5));
  CHECK_THROWS_WITH_AS(read_events_binary(path), doctest::Contains("byte offset"), format_error);
  std::remove(path.c_str());
}
