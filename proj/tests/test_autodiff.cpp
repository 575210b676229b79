#include <cmath>

#include "doctest.h"
#include "evtex/autodiff.hpp"
#include "evtex/util.hpp"

using namespace evtex;
using namespace evtex::ad;

TEST_CASE("product rule: d(x*y) at (3,4) is (4,3)") {
  Tape tape;
  DiffTensor x = tape.var({1}, {3.0});
  DiffTensor y = tape.var({1}, {4.0});
  DiffTensor z = mul(x, y);
  tape.backward(z);
  CHECK(tape.grad(x.node)[0] == doctest::Approx(4.0));
  CHECK(tape.grad(y.node)[0] == doctest::Approx(3.0));
}

TEST_CASE("d log(x) at x=2 is 0.5") {
  Tape tape;
  DiffTensor x = tape.var({1}, {2.0});
  DiffTensor y = log(x);
  tape.backward(y);
  CHECK(tape.grad(x.node)[0] == doctest::Approx(0.5));
}

TEST_CASE("log of a non-positive value is a domain error") {
  Tape tape;
  DiffTensor x = tape.var({1}, {-1.0});
  CHECK_THROWS_AS(log(x), std::domain_error);
}

TEST_CASE("half_rectify subgradient: 0 below, 1 above") {
  Tape tape;
  DiffTensor x = tape.var({2}, {-1.0, 2.0});
  DiffTensor y = sum(half_rectify(x));
  tape.backward(y);
  CHECK(tape.grad(x.node)[0] == 0.0);
  CHECK(tape.grad(x.node)[1] == 1.0);
}

TEST_CASE("STE threshold: hard forward, identity backward, strict at 0.5") {
  Tape tape;
  DiffTensor x = tape.var({3}, {0.7, 0.5, 0.2});
  DiffTensor y = ste_threshold(x);
  CHECK(y.v[0] == 1.0);
  CHECK(y.v[1] == 0.0);  // strict inequality
  CHECK(y.v[2] == 0.0);
  tape.backward(sum(y));
  for (double g : tape.grad(x.node)) CHECK(g == 1.0);
}

TEST_CASE("STE floor: floor forward, identity backward") {
  Tape tape;
  DiffTensor x = tape.var({1}, {1.9});
  DiffTensor y = ste_floor(x);
  CHECK(y.v[0] == 1.0);
  tape.backward(y);
  CHECK(tape.grad(x.node)[0] == 1.0);
}

TEST_CASE("loss = sum(x) gives all-ones gradient") {
  Tape tape;
  DiffTensor x = tape.var({4}, {1, 2, 3, 4});
  tape.backward(sum(x));
  for (double g : tape.grad(x.node)) CHECK(g == 1.0);
}

TEST_CASE("fan-out gradients accumulate over both paths") {
  // loss = x*x + 3x -> dloss/dx = 2x + 3
  Tape tape;
  DiffTensor x = tape.var({1}, {5.0});
  DiffTensor loss = add(mul(x, x), affine(x, 3.0, 0.0));
  tape.backward(loss);
  CHECK(tape.grad(x.node)[0] == doctest::Approx(13.0));
}

TEST_CASE("constant leaves receive no gradient and non-scalar loss is rejected") {
  Tape tape;
  DiffTensor x = tape.var({2}, {1.0, 2.0});
  DiffTensor c = constant({2}, {3.0, 4.0});
  DiffTensor y = mul(x, c);
  CHECK_THROWS_AS(tape.backward(y), std::invalid_argument);
  tape.backward(sum(y));
  CHECK(tape.grad(x.node)[0] == 3.0);
  CHECK(tape.grad(x.node)[1] == 4.0);
}

TEST_CASE("1x1 convolution with kernel 2 doubles entries, input gradient 2") {
  Tape tape;
  DiffTensor x = tape.var({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  DiffTensor k = constant({1, 1, 1, 1}, {2.0});
  DiffTensor b = constant({1}, {0.0});
  DiffTensor y = conv2d(x, k, b, 1, 0);
  for (int i = 0; i < 9; ++i) CHECK(y.v[i] == doctest::Approx(2.0 * (i + 1)));
  tape.backward(sum(y));
  for (double g : tape.grad(x.node)) CHECK(g == doctest::Approx(2.0));
}

TEST_CASE("conv2d rejects channel mismatch with a shape error") {
  Tape tape;
  DiffTensor x = tape.var({2, 3, 3}, std::vector<double>(18, 1.0));
  DiffTensor k = constant_fill({1, 3, 3, 3}, 0.1);
  DiffTensor b = constant({1}, {0.0});
  CHECK_THROWS_WITH_AS(conv2d(x, k, b, 1, 1), doctest::Contains("channel"),
                       std::invalid_argument);
}

TEST_CASE("bilinear sample at a pixel center returns that pixel") {
  Tape tape;
  DiffTensor img = tape.var({2, 2}, {1, 2, 3, 4});
  DiffTensor s = bilinear_sample(img, {1.0}, {0.0});
  CHECK(s.v[0] == doctest::Approx(2.0));
}

TEST_CASE("bilinear backward splats to the 4 neighbors by weight") {
  Tape tape;
  DiffTensor img = tape.var({2, 2}, {0, 0, 0, 0});
  DiffTensor s = bilinear_sample(img, {0.25}, {0.75});
  tape.backward(sum(s));
  auto& g = tape.grad(img.node);
  CHECK(g[0] == doctest::Approx(0.75 * 0.25));
  CHECK(g[1] == doctest::Approx(0.25 * 0.25));
  CHECK(g[2] == doctest::Approx(0.75 * 0.75));
  CHECK(g[3] == doctest::Approx(0.25 * 0.75));
}

TEST_CASE("gradient of sum(conv(x,k)) matches finite differences") {
  Rng rng(11);
  std::vector<double> x0(64);
  for (auto& v : x0) v = rng.uniform(-1, 1);
  std::vector<double> kv(9);
  for (auto& v : kv) v = rng.uniform(-1, 1);
  double err = finite_diff_check(
      [&](Tape& tape, const DiffTensor& x) {
        DiffTensor xi = reshape(x, {1, 8, 8});
        DiffTensor k = constant({1, 1, 3, 3}, kv);
        DiffTensor b = constant({1}, {0.3});
        return sum(conv2d(xi, k, b, 1, 1));
      },
      {64}, x0);
  CHECK(err < 1e-6);
}

TEST_CASE("smooth primitives pass finite-difference checks at 1e-6") {
  Rng rng(21);
  std::vector<double> x0(16);
  for (auto& v : x0) v = rng.uniform(0.2, 2.0);

  auto check = [&](auto f) {
    return finite_diff_check(
        [&](Tape& tape, const DiffTensor& x) { return sum(f(x)); }, {16}, x0);
  };
  CHECK(check([](const DiffTensor& x) { return log(x); }) < 1e-6);
  CHECK(check([](const DiffTensor& x) { return sigmoid(x); }) < 1e-6);
  CHECK(check([](const DiffTensor& x) { return softplus(x); }) < 1e-6);
  CHECK(check([](const DiffTensor& x) { return mul(x, x); }) < 1e-6);
  CHECK(check([](const DiffTensor& x) { return div(constant_scalar(1.0), x); }) < 1e-6);
  CHECK(check([](const DiffTensor& x) { return exp(affine(x, 0.5, -1.0)); }) < 1e-6);
}

TEST_CASE("sum-of-squares gradient check is tight") {
  std::vector<double> x0 = {1.0, -2.0, 0.5, 3.0};
  double err = finite_diff_check(
      [](Tape& tape, const DiffTensor& x) { return sum(mul(x, x)); }, {4}, x0);
  CHECK(err < 1e-8);
}

TEST_CASE("max routes gradient to the first argmax only") {
  Tape tape;
  DiffTensor x = tape.var({4}, {1.0, 7.0, 7.0, 2.0});
  tape.backward(max(x));
  auto& g = tape.grad(x.node);
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 1.0);
  CHECK(g[2] == 0.0);
  CHECK(g[3] == 0.0);
}

TEST_CASE("upsample backward sums a block into its source cell") {
  Tape tape;
  DiffTensor x = tape.var({2, 2}, {1, 0, 0, 1});
  DiffTensor up = upsample_nearest(x, 2);
  CHECK(up.shape == std::vector<int>{4, 4});
  CHECK(up.v[0] == 1.0);
  CHECK(up.v[5] == 1.0);
  CHECK(up.v[2] == 0.0);
  tape.backward(sum(up));
  for (double g : tape.grad(x.node)) CHECK(g == doctest::Approx(4.0));
}

TEST_CASE("gather/scatter_add are adjoint") {
  Tape tape;
  DiffTensor x = tape.var({3}, {5, 6, 7});
  DiffTensor g = gather(x, {2, 0, 2});
  CHECK(g.v == std::vector<double>{7, 5, 7});
  DiffTensor sc = scatter_add(g, {0, 1, 1}, {2});
  CHECK(sc.v == std::vector<double>{7, 12});
  tape.backward(sum(sc));
  auto& gx = tape.grad(x.node);
  CHECK(gx[0] == 1.0);
  CHECK(gx[2] == 2.0);
}

TEST_CASE("emax/emin gradients follow the selected operand") {
  Tape tape;
  DiffTensor a = tape.var({2}, {1.0, 5.0});
  DiffTensor b = tape.var({2}, {3.0, 2.0});
  tape.backward(sum(emax(a, b)));
  CHECK(tape.grad(a.node) == std::vector<double>{0.0, 1.0});
  CHECK(tape.grad(b.node) == std::vector<double>{1.0, 0.0});
}

TEST_CASE("scalar broadcasting works both ways") {
  Tape tape;
  DiffTensor x = tape.var({3}, {1, 2, 3});
  DiffTensor s = tape.var({1}, {10.0});
  DiffTensor y = mul(x, s);
  CHECK(y.v == std::vector<double>{10, 20, 30});
  tape.backward(sum(y));
  CHECK(tape.grad(s.node)[0] == doctest::Approx(6.0));
}

TEST_CASE("mismatched non-scalar shapes raise a shape error") {
  Tape tape;
  DiffTensor a = tape.var({2}, {1, 2});
  DiffTensor b = tape.var({3}, {1, 2, 3});
  CHECK_THROWS_AS(add(a, b), std::invalid_argument);
}
