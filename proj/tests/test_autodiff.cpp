#include <doctest.h>

#include <cmath>

#include "gradinv/autodiff.hpp"
#include "gradinv/rng.hpp"
#include "test_util.hpp"

using namespace gradinv;
using testutil::fd_grad;
using testutil::max_rel_err;
using testutil::random_normal;
using testutil::random_uniform;

TEST_CASE("broadcasting matches explicit expansion") {
  Rng rng(7);
  NDArray a = random_normal({2, 3, 4}, rng);
  NDArray b = random_normal({3, 1}, rng);
  Tensor out = mul(Tensor::constant(a), Tensor::constant(b));
  REQUIRE(out.shape() == Shape{2, 3, 4});
  for (int64_t i = 0; i < 2; ++i)
    for (int64_t j = 0; j < 3; ++j)
      for (int64_t k = 0; k < 4; ++k)
        CHECK(out.value().at({i, j, k}) == doctest::Approx(a.at({i, j, k}) * b.at({j, 0})));
}

TEST_CASE("sum_to_shape is the adjoint of broadcast_to") {
  Rng rng(9);
  NDArray x = random_normal({2, 1, 4}, rng);
  NDArray y = random_normal({2, 3, 4}, rng);
  // <broadcast(x), y> == <x, reduce(y)>
  double lhs = 0.0;
  NDArray bx = broadcast_array(x, {2, 3, 4});
  for (int64_t i = 0; i < bx.numel(); ++i) lhs += bx[i] * y[i];
  NDArray ry = reduce_to_shape(y, {2, 1, 4});
  double rhs = 0.0;
  for (int64_t i = 0; i < x.numel(); ++i) rhs += x[i] * ry[i];
  CHECK(lhs == doctest::Approx(rhs));
}

TEST_CASE("first-order gradients match finite differences on a composite") {
  Rng rng(11);
  NDArray x0 = random_uniform({2, 3}, rng, 0.2, 1.2);
  NDArray w0 = random_normal({3, 2}, rng);

  auto eval = [&](const NDArray& xv, const NDArray& wv) {
    Tensor x = Tensor::leaf(xv, true);
    Tensor w = Tensor::leaf(wv, true);
    Tensor h = sigmoid(matmul(x, w));
    // Mixes paths and reuses x on two branches.
    Tensor out = add(sum_all(square(h)), sum_all(log(shift(square(x), 0.3))));
    return std::tuple{out, x, w};
  };

  auto [out, x, w] = eval(x0, w0);
  std::vector<Tensor> g = grad(out, {x, w});

  NDArray fx = fd_grad([&](const NDArray& v) { return std::get<0>(eval(v, w0)).value().item(); },
                       x0);
  NDArray fw = fd_grad([&](const NDArray& v) { return std::get<0>(eval(x0, v)).value().item(); },
                       w0);
  CHECK(max_rel_err(g[0].value(), fx) < 1e-6);
  CHECK(max_rel_err(g[1].value(), fw) < 1e-6);
}

TEST_CASE("unary op gradients match finite differences") {
  Rng rng(13);
  NDArray x0 = random_uniform({4, 3}, rng, 0.1, 2.0);
  auto funcs = std::vector<std::pair<const char*, Tensor (*)(const Tensor&)>>{
      {"exp", exp}, {"log", log}, {"sqrt", sqrt}, {"sigmoid", sigmoid},
      {"tanh", tanh}, {"abs", abs}, {"relu", relu}};
  for (auto [name, f] : funcs) {
    CAPTURE(name);
    Tensor x = Tensor::leaf(x0, true);
    Tensor out = sum_all(f(x));
    NDArray got = grad(out, {x})[0].value();
    NDArray want = fd_grad(
        [&](const NDArray& v) { return sum_all(f(Tensor::constant(v))).value().item(); }, x0);
    CHECK(max_rel_err(got, want) < 1e-6);
  }
}

TEST_CASE("conv family gradients match finite differences") {
  Rng rng(17);
  for (auto [stride, pad] : {std::pair<int64_t, int64_t>{1, 1}, {2, 1}, {1, 0}}) {
    CAPTURE(stride);
    CAPTURE(pad);
    NDArray x0 = random_normal({2, 3, 6, 6}, rng);
    NDArray w0 = random_normal({4, 3, 3, 3}, rng);

    auto loss = [&](const NDArray& xv, const NDArray& wv) {
      Tensor x = Tensor::leaf(xv, true);
      Tensor w = Tensor::leaf(wv, true);
      Tensor y = conv2d(x, w, stride, pad);
      return std::tuple{sum_all(square(y)), x, w};
    };
    auto [out, x, w] = loss(x0, w0);
    std::vector<Tensor> g = grad(out, {x, w});
    NDArray fx = fd_grad(
        [&](const NDArray& v) { return std::get<0>(loss(v, w0)).value().item(); }, x0, 1e-5);
    NDArray fw = fd_grad(
        [&](const NDArray& v) { return std::get<0>(loss(x0, v)).value().item(); }, w0, 1e-5);
    CHECK(max_rel_err(g[0].value(), fx, 1e-6) < 1e-5);
    CHECK(max_rel_err(g[1].value(), fw, 1e-6) < 1e-5);
  }
}

TEST_CASE("transposed convolution gradients match finite differences") {
  Rng rng(19);
  NDArray x0 = random_normal({1, 4, 3, 3}, rng);
  NDArray w0 = random_normal({4, 2, 4, 4}, rng);
  auto loss = [&](const NDArray& xv, const NDArray& wv) {
    Tensor x = Tensor::leaf(xv, true);
    Tensor w = Tensor::leaf(wv, true);
    Tensor y = conv_transpose2d(x, w, 2, 1, 6, 6);
    return std::tuple{sum_all(square(y)), x, w};
  };
  auto [out, x, w] = loss(x0, w0);
  REQUIRE(out.defined());
  std::vector<Tensor> g = grad(out, {x, w});
  NDArray fx =
      fd_grad([&](const NDArray& v) { return std::get<0>(loss(v, w0)).value().item(); }, x0);
  NDArray fw =
      fd_grad([&](const NDArray& v) { return std::get<0>(loss(x0, v)).value().item(); }, w0);
  CHECK(max_rel_err(g[0].value(), fx, 1e-6) < 1e-5);
  CHECK(max_rel_err(g[1].value(), fw, 1e-6) < 1e-5);
}

TEST_CASE("second-order: analytic cubic") {
  // f = sum(x^3): df/dx = 3x^2, d(sum(df/dx))/dx = 6x.
  NDArray x0({3}, {0.5, -1.25, 2.0});
  Tensor x = Tensor::leaf(x0, true);
  Tensor f = sum_all(mul(x, square(x)));
  Tensor gx = grad(f, {x})[0];
  for (int64_t i = 0; i < 3; ++i)
    CHECK(gx.value()[i] == doctest::Approx(3.0 * x0[i] * x0[i]));
  Tensor g2 = grad(sum_all(gx), {x})[0];
  for (int64_t i = 0; i < 3; ++i) CHECK(g2.value()[i] == doctest::Approx(6.0 * x0[i]));
}

TEST_CASE("second-order through matmul, conv and nonlinearity matches finite differences") {
  Rng rng(23);
  NDArray x0 = random_normal({1, 2, 5, 5}, rng, 0.5);
  NDArray w0 = random_normal({3, 2, 3, 3}, rng, 0.5);
  NDArray tgt = random_normal({3, 2, 3, 3}, rng, 0.5);

  // phi(x) = || d/dw sum(sigmoid(conv(x,w))) - tgt ||^2 : needs grad-of-grad.
  auto phi = [&](const NDArray& xv) {
    Tensor x = Tensor::leaf(xv, true);
    Tensor w = Tensor::leaf(w0, true);
    Tensor f = sum_all(sigmoid(conv2d(x, w, 1, 1)));
    Tensor gw = grad(f, {w})[0];
    Tensor r = sub(gw, Tensor::constant(tgt));
    return std::tuple{sum_all(square(r)), x};
  };
  auto [out, x] = phi(x0);
  Tensor analytic = grad(out, {x})[0];
  NDArray fd = fd_grad([&](const NDArray& v) { return std::get<0>(phi(v)).value().item(); }, x0,
                       1e-5);
  CHECK(max_rel_err(analytic.value(), fd, 1e-6) < 1e-4);
}

TEST_CASE("reduce_max_all routes gradient to first argmax") {
  NDArray x0({4}, {1.0, 3.0, 3.0, 2.0});
  Tensor x = Tensor::leaf(x0, true);
  Tensor m = reduce_max_all(x);
  CHECK(m.value().item() == 3.0);
  NDArray g = grad(m, {x})[0].value();
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 1.0);
  CHECK(g[2] == 0.0);
  CHECK(g[3] == 0.0);
}

TEST_CASE("grad returns zeros for unreachable wrt") {
  Tensor a = Tensor::leaf(NDArray::scalar(2.0), true);
  Tensor b = Tensor::leaf(NDArray({3}, 1.0), true);
  Tensor out = square(a);
  std::vector<Tensor> gs = grad(out, {a, b});
  CHECK(gs[0].value().item() == doctest::Approx(4.0));
  CHECK(gs[1].shape() == Shape{3});
  for (int64_t i = 0; i < 3; ++i) CHECK(gs[1].value()[i] == 0.0);
}

TEST_CASE("gradient accumulates across multiple uses") {
  Tensor x = Tensor::leaf(NDArray::scalar(3.0), true);
  Tensor out = add(mul(x, x), scale(x, 5.0));  // x^2 + 5x
  CHECK(grad(out, {x})[0].value().item() == doctest::Approx(2.0 * 3.0 + 5.0));
}

TEST_CASE("mean and sum reductions") {
  Rng rng(29);
  NDArray x0 = random_normal({2, 3, 2}, rng);
  Tensor x = Tensor::constant(x0);
  double s = 0.0;
  for (int64_t i = 0; i < x0.numel(); ++i) s += x0[i];
  CHECK(sum_all(x).value().item() == doctest::Approx(s));
  CHECK(mean_all(x).value().item() == doctest::Approx(s / 12.0));
  Tensor sk = sum_axes_keepdim(x, {0, 2});
  REQUIRE(sk.shape() == Shape{1, 3, 1});
  for (int64_t j = 0; j < 3; ++j) {
    double want = 0.0;
    for (int64_t i = 0; i < 2; ++i)
      for (int64_t k = 0; k < 2; ++k) want += x0.at({i, j, k});
    CHECK(sk.value().at({0, j, 0}) == doctest::Approx(want));
  }
}
