#include "doctest.h"
#include "evtex/texture.hpp"

using namespace evtex;
using namespace evtex::ad;

TEST_CASE("z = 0 gives u = 0.5 with sigmoid gradient 0.25") {
  Tape tape;
  DiffTensor z = tape.var({2, 2}, {0, 0, 0, 0});
  DiffTensor u = generate_texture_grid(z);
  for (double v : u.v) CHECK(v == doctest::Approx(0.5));
  tape.backward(sum(u));
  for (double g : tape.grad(z.node)) CHECK(g == doctest::Approx(0.25));
}

TEST_CASE("large z saturates toward white") {
  Tape tape;
  DiffTensor z = tape.var({1, 1}, {40.0});
  CHECK(generate_texture_grid(z).v[0] == doctest::Approx(1.0));
}

TEST_CASE("white init latent starts near white") {
  LatentGrid g = LatentGrid::white_init(4);
  Tape tape;
  DiffTensor u = generate_texture_grid(tape, g);
  for (double v : u.v) CHECK(v > 0.98);
}

TEST_CASE("hard binarize thresholds at 0.5 strictly") {
  Tape tape;
  DiffTensor u = tape.var({3}, {0.7, 0.5, 0.3});
  DiffTensor b = binarize(u, {true, 1.0});
  CHECK(b.v == std::vector<double>{1.0, 0.0, 0.0});
}

TEST_CASE("soft binarize midpoint and low-temperature limit") {
  Tape tape;
  DiffTensor u = tape.var({1}, {0.5});
  CHECK(binarize(u, {false, 1.0}).v[0] == doctest::Approx(0.5));
  DiffTensor u2 = tape.var({1}, {0.6});
  CHECK(binarize(u2, {false, 0.01}).v[0] == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("hard/soft agreement away from the threshold") {
  double temp = 0.05;
  for (double u = 0.0; u <= 1.0; u += 0.01) {
    if (std::abs(u - 0.5) <= 5 * temp) continue;
    Tape tape;
    DiffTensor x = tape.var({1}, {u});
    double soft = binarize(x, {false, temp}).v[0];
    double hard = binarize(x, {true, temp}).v[0];
    CHECK(std::abs(soft - hard) < 1e-2);
  }
}

TEST_CASE("upsample: checker blocks and c=1 identity") {
  Tape tape;
  DiffTensor u = tape.var({2, 2}, {1, 0, 0, 1});
  DiffTensor up = upsample_texture(u, 2);
  CHECK(up.v == std::vector<double>{1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 1, 1, 0, 0, 1, 1});
  CHECK(upsample_texture(u, 1).v == u.v);
}

TEST_CASE("upsample backward is c^2 per source cell") {
  double err = finite_diff_check(
      [](Tape& tape, const DiffTensor& x) {
        return sum(upsample_nearest(reshape(x, {2, 2}), 3));
      },
      {4}, {0.3, 0.7, 0.1, 0.9});
  CHECK(err < 1e-8);
  Tape tape;
  DiffTensor u = tape.var({2, 2}, {0.3, 0.7, 0.1, 0.9});
  tape.backward(sum(upsample_nearest(u, 3)));
  for (double g : tape.grad(u.node)) CHECK(g == doctest::Approx(9.0));
}

TEST_CASE("mask extremes: all-off is white, all-on is identity") {
  Tape tape;
  DiffTensor u = tape.var({2, 2}, {0.2, 0.4, 0.6, 0.8});
  BodyMask off = BodyMask::from_regions(2, 2, {});
  BodyMask on = BodyMask::full(2, 2);
  for (double v : apply_mask(u, off).v) CHECK(v == 1.0);
  CHECK(apply_mask(u, on).v == u.v);
}

TEST_CASE("region mask keeps texture inside and white outside") {
  Tape tape;
  DiffTensor u = tape.var({4, 4}, std::vector<double>(16, 0.25));
  BodyMask legs = BodyMask::from_regions(4, 4, {{"legs", 0, 2, 4, 4}});
  DiffTensor m = apply_mask(u, legs);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) CHECK(m.v[y * 4 + x] == (y >= 2 ? 0.25 : 1.0));
}

TEST_CASE("apply_mask is idempotent") {
  Tape tape;
  DiffTensor u = tape.var({4, 4}, std::vector<double>(16, 0.3));
  BodyMask mask = BodyMask::from_regions(4, 4, {{"r", 1, 1, 3, 3}});
  DiffTensor once = apply_mask(u, mask);
  DiffTensor twice = apply_mask(once, mask);
  CHECK(once.v == twice.v);
}

TEST_CASE("no gradient flows into masked-out pixels") {
  Tape tape;
  DiffTensor u = tape.var({2, 2}, {0.2, 0.4, 0.6, 0.8});
  BodyMask mask = BodyMask::from_regions(2, 2, {{"r", 0, 0, 1, 2}});  // left column only
  tape.backward(sum(apply_mask(u, mask)));
  auto& g = tape.grad(u.node);
  CHECK(g[0] == 1.0);
  CHECK(g[1] == 0.0);
  CHECK(g[2] == 1.0);
  CHECK(g[3] == 0.0);
}

TEST_CASE("hard pipeline yields exactly {0,1} unmasked and 1 masked") {
  Tape tape;
  DiffTensor z = tape.var({2, 2}, {-3.0, 2.0, 0.4, -0.1});
  BodyMask mask = BodyMask::from_regions(4, 4, {{"r", 0, 0, 4, 2}});
  DiffTensor tm = texture_map(z, {true, 1.0}, 2, mask);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      double v = tm.v[y * 4 + x];
      if (y < 2)
        CHECK((v == 0.0 || v == 1.0));
      else
        CHECK(v == 1.0);
    }
}

TEST_CASE("temperature schedule anneals then goes hard") {
  TemperatureSchedule sched;
  BinarizeOptions first = sched.at(0, 1000);
  CHECK_FALSE(first.hard);
  CHECK(first.temperature == doctest::Approx(1.0));
  BinarizeOptions late = sched.at(900, 1000);
  CHECK(late.hard);
  BinarizeOptions mid = sched.at(400, 1000);
  CHECK_FALSE(mid.hard);
  CHECK(mid.temperature < first.temperature);
  CHECK(mid.temperature > 0.02);
}
