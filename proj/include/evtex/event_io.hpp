#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "evtex/events.hpp"

namespace evtex {

struct format_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Binary event file layout:
//   16-byte header: magic "EVTX", version u16 = 1, width u16, height u16,
//   6 reserved bytes; then little-endian records of
//   (t: u64 microseconds, x: u16, y: u16, p: i8, 3 pad bytes).
//
// The interval bounds are not stored; readers get [min_t, max_t + 1) unless
// the stream is empty, in which case [0, 1).

namespace detail {

inline void put_u16(std::string& b, uint16_t v) {
  b.push_back(static_cast<char>(v & 0xff));
  b.push_back(static_cast<char>(v >> 8));
}

inline void put_u64(std::string& b, uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline uint16_t get_u16(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

inline uint64_t get_u64(const unsigned char* p) {
  uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

}  // namespace detail

inline void write_events_binary(const std::string& path, const EventStream& stream) {
  std::string buf;
  buf.reserve(16 + 16 * stream.events.size());
  buf += "EVTX";
  detail::put_u16(buf, 1);
  detail::put_u16(buf, stream.width);
  detail::put_u16(buf, stream.height);
  buf.append(6, '\0');
  for (const Event& e : stream.events) {
    detail::put_u64(buf, e.t);
    detail::put_u16(buf, e.x);
    detail::put_u16(buf, e.y);
    buf.push_back(static_cast<char>(e.p));
    buf.append(3, '\0');
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

inline EventStream read_events_binary(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for read: " + path);
  std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (data.size() < 16) throw format_error(path + ": truncated header at byte offset 0");
  const auto* p = reinterpret_cast<const unsigned char*>(data.data());
  if (std::memcmp(p, "EVTX", 4) != 0) throw format_error(path + ": bad magic at byte offset 0");
  uint16_t version = detail::get_u16(p + 4);
  if (version != 1)
    throw format_error(path + ": unsupported version " + std::to_string(version) +
                       " at byte offset 4");
  EventStream s;
  s.width = detail::get_u16(p + 6);
  s.height = detail::get_u16(p + 8);
  size_t body = data.size() - 16;
  if (body % 16 != 0)
    throw format_error(path + ": truncated record at byte offset " +
                       std::to_string(16 + (body / 16) * 16));
  size_t n = body / 16;
  s.events.reserve(n);
  uint64_t prev_t = 0;
  for (size_t i = 0; i < n; ++i) {
    const unsigned char* r = p + 16 + 16 * i;
    Event e;
    e.t = detail::get_u64(r);
    e.x = detail::get_u16(r + 8);
    e.y = detail::get_u16(r + 10);
    e.p = static_cast<int8_t>(r[12]);
    if (i > 0 && e.t < prev_t)
      throw format_error(path + ": unsorted file at byte offset " + std::to_string(16 + 16 * i));
    prev_t = e.t;
    s.events.push_back(e);
  }
  if (s.events.empty()) {
    s.t_start = 0;
    s.t_end = 1;
  } else {
    s.t_start = s.events.front().t;
    s.t_end = s.events.back().t + 1;
  }
  return s;
}

// Text format: header line `# evtx v1 <width> <height>`, then CSV lines
// `t,x,y,p` with p in {1,-1}.

inline void write_events_text(const std::string& path, const EventStream& stream) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f << "# evtx v1 " << stream.width << ' ' << stream.height << '\n';
  for (const Event& e : stream.events)
    f << e.t << ',' << e.x << ',' << e.y << ',' << static_cast<int>(e.p) << '\n';
  if (!f) throw std::runtime_error("write failed: " + path);
}

inline EventStream read_events_text(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open for read: " + path);
  std::string line;
  if (!std::getline(f, line)) throw format_error(path + ": missing header at byte offset 0");
  std::istringstream hs(line);
  std::string hash, tag, ver;
  unsigned w = 0, h = 0;
  hs >> hash >> tag >> ver >> w >> h;
  if (hash != "#" || tag != "evtx" || ver != "v1" || hs.fail())
    throw format_error(path + ": bad header at byte offset 0");
  EventStream s;
  s.width = static_cast<uint16_t>(w);
  s.height = static_cast<uint16_t>(h);
  size_t offset = line.size() + 1;
  uint64_t prev_t = 0;
  bool first = true;
  while (std::getline(f, line)) {
    if (!line.empty()) {
      uint64_t t;
      unsigned x, y;
      int p;
      char c1, c2, c3;
      std::istringstream ls(line);
      ls >> t >> c1 >> x >> c2 >> y >> c3 >> p;
      if (ls.fail() || c1 != ',' || c2 != ',' || c3 != ',' || (p != 1 && p != -1))
        throw format_error(path + ": malformed record at byte offset " + std::to_string(offset));
      if (!first && t < prev_t)
        throw format_error(path + ": unsorted file at byte offset " + std::to_string(offset));
      prev_t = t;
      first = false;
      s.events.push_back(Event{static_cast<uint16_t>(x), static_cast<uint16_t>(y), t,
                               static_cast<int8_t>(p)});
    }
    offset += line.size() + 1;
  }
  if (s.events.empty()) {
    s.t_start = 0;
    s.t_end = 1;
  } else {
    s.t_start = s.events.front().t;
    s.t_end = s.events.back().t + 1;
  }
  return s;
}

inline void write_events(const std::string& path, const EventStream& stream, bool binary = true) {
  if (binary)
    write_events_binary(path, stream);
  else
    write_events_text(path, stream);
}

inline EventStream read_events(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for read: " + path);
  char magic[4] = {0, 0, 0, 0};
  f.read(magic, 4);
  f.close();
  if (std::memcmp(magic, "EVTX", 4) == 0) return read_events_binary(path);
  return read_events_text(path);
}

}  // namespace evtex
