#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace evtex {

// FNV-1a 64-bit over raw bytes; used to fingerprint detector params, configs
// and inputs in manifests.
inline uint64_t fnv1a64(const void* data, size_t len, uint64_t seed = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t h = seed;
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

inline uint64_t fnv1a64(const std::vector<double>& v) {
  return fnv1a64(v.data(), v.size() * sizeof(double));
}

inline std::string hex64(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

// splitmix64: tiny deterministic RNG with a fixed cross-platform stream.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1)
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform in [lo, hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  uint64_t below(uint64_t n) { return next_u64() % n; }

  // standard normal via Box-Muller
  double normal() {
    double u1 = std::max(next_double(), 1e-300);
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

 private:
  uint64_t state_;
};

// 8-bit binary PGM (P5).
inline void write_pgm(const std::string& path, const std::vector<double>& pixels, int width,
                      int height) {
  if (static_cast<size_t>(width) * height != pixels.size())
    throw std::invalid_argument("write_pgm: size mismatch");
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f << "P5\n" << width << ' ' << height << "\n255\n";
  std::string body(pixels.size(), '\0');
  for (size_t i = 0; i < pixels.size(); ++i) {
    double x = std::clamp(pixels[i], 0.0, 1.0);
    body[i] = static_cast<char>(static_cast<unsigned char>(std::lround(x * 255.0)));
  }
  f.write(body.data(), static_cast<std::streamsize>(body.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

inline std::vector<double> read_pgm(const std::string& path, int& width, int& height) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for read: " + path);
  std::string magic;
  int maxval = 0;
  f >> magic >> width >> height >> maxval;
  if (magic != "P5" || maxval != 255 || width <= 0 || height <= 0)
    throw std::runtime_error(path + ": not an 8-bit P5 PGM");
  f.get();  // single whitespace after maxval
  std::vector<double> out(static_cast<size_t>(width) * height);
  std::string body(out.size(), '\0');
  f.read(body.data(), static_cast<std::streamsize>(body.size()));
  if (!f) throw std::runtime_error(path + ": truncated pixel data");
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<double>(static_cast<unsigned char>(body[i])) / 255.0;
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for read: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& data) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f.write(data.data(), static_cast<std::streamsize>(data.size()));
}

}  // namespace evtex
