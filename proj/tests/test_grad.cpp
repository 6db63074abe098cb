#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "evlab/grad_check.hpp"
#include "evlab/ops.hpp"
#include "evlab/rng.hpp"

using namespace evlab;

namespace {

using Tensor64d = TensorT<double>;

// Scalar objective: dot(out, coeffs). Its gradient w.r.t. out is coeffs, so
// feeding coeffs through a layer's backward gives the analytic gradient to
// compare against central differences.
double weighted_sum(const Tensor64d& out, const std::vector<double>& coeffs) {
  double s = 0;
  for (std::size_t i = 0; i < out.numel(); ++i) s += out.data[i] * coeffs[i];
  return s;
}

Tensor64d coeff_tensor(const std::vector<std::size_t>& shape, Rng& rng) {
  auto t = random_uniform<double>(rng, shape, -1, 1);
  return t;
}

struct Check {
  GradCheckReport report;
};

Check check_against(const std::function<double(std::span<const double>)>& f,
                    const Tensor64d& point, const Tensor64d& analytic) {
  std::vector<double> p = point.data;
  return {grad_check(f, std::move(p), analytic.data)};
}

}  // namespace

TEST_CASE("conv2d input, weight, and bias gradients pass finite differences") {
  for (std::uint64_t seed = 1; seed <= 7; ++seed) {
    Rng rng(seed);
    const std::size_t ci = 1 + rng.next_below(3), co = 1 + rng.next_below(3);
    const std::size_t h = 2 + rng.next_below(4), wd = 2 + rng.next_below(4);
    const auto in = random_uniform<double>(rng, {2, ci, h, wd}, -1, 1);
    const auto w = random_uniform<double>(rng, {co, ci, 3, 3}, -1, 1);
    const auto b = random_uniform<double>(rng, {co}, -1, 1);
    const auto coeffs = coeff_tensor({2, co, h, wd}, rng);

    const auto grads = ops::conv2d_bwd(coeffs, in, w);

    const auto f_in = [&](std::span<const double> p) {
      auto x = in;
      x.data.assign(p.begin(), p.end());
      return weighted_sum(ops::conv2d_fwd(x, w, b), coeffs.data);
    };
    CHECK(check_against(f_in, in, grads.input).report.ok());

    const auto f_w = [&](std::span<const double> p) {
      auto x = w;
      x.data.assign(p.begin(), p.end());
      return weighted_sum(ops::conv2d_fwd(in, x, b), coeffs.data);
    };
    CHECK(check_against(f_w, w, grads.weight).report.ok());

    const auto f_b = [&](std::span<const double> p) {
      auto x = b;
      x.data.assign(p.begin(), p.end());
      return weighted_sum(ops::conv2d_fwd(in, w, x), coeffs.data);
    };
    CHECK(check_against(f_b, b, grads.bias).report.ok());
  }
}

TEST_CASE("fc gradients pass finite differences") {
  for (std::uint64_t seed = 11; seed <= 16; ++seed) {
    Rng rng(seed);
    const std::size_t n = 1 + rng.next_below(3), feat = 1 + rng.next_below(8),
                      out = 1 + rng.next_below(5);
    const auto in = random_uniform<double>(rng, {n, feat}, -1, 1);
    const auto w = random_uniform<double>(rng, {out, feat}, -1, 1);
    const auto b = random_uniform<double>(rng, {out}, -1, 1);
    const auto coeffs = coeff_tensor({n, out}, rng);
    const auto grads = ops::fc_bwd(coeffs, in, w);

    const auto f_in = [&](std::span<const double> p) {
      auto x = in;
      x.data.assign(p.begin(), p.end());
      return weighted_sum(ops::fc_fwd(x, w, b), coeffs.data);
    };
    CHECK(check_against(f_in, in, grads.input).report.ok());

    const auto f_w = [&](std::span<const double> p) {
      auto x = w;
      x.data.assign(p.begin(), p.end());
      return weighted_sum(ops::fc_fwd(in, x, b), coeffs.data);
    };
    CHECK(check_against(f_w, w, grads.weight).report.ok());

    const auto f_b = [&](std::span<const double> p) {
      auto x = b;
      x.data.assign(p.begin(), p.end());
      return weighted_sum(ops::fc_fwd(in, w, x), coeffs.data);
    };
    CHECK(check_against(f_b, b, grads.bias).report.ok());
  }
}

TEST_CASE("relu gradient passes finite differences away from the kink") {
  Rng rng(21);
  auto in = random_uniform<double>(rng, {2, 3, 4, 4}, -1, 1);
  for (auto& v : in.data)
    if (std::abs(v) < 1e-3) v = 0.1;  // keep the step well clear of 0
  const auto coeffs = coeff_tensor(in.shape, rng);
  const auto analytic = ops::relu_bwd(coeffs, in);
  const auto f = [&](std::span<const double> p) {
    auto x = in;
    x.data.assign(p.begin(), p.end());
    return weighted_sum(ops::relu_fwd(x), coeffs.data);
  };
  CHECK(check_against(f, in, analytic).report.ok());
}

TEST_CASE("sigmoid gradient passes finite differences") {
  for (std::uint64_t seed = 31; seed <= 34; ++seed) {
    Rng rng(seed);
    const auto in = random_uniform<double>(rng, {3, 5}, -3, 3);
    const auto coeffs = coeff_tensor(in.shape, rng);
    const auto out = ops::sigmoid_fwd(in);
    const auto analytic = ops::sigmoid_bwd(coeffs, out);
    const auto f = [&](std::span<const double> p) {
      auto x = in;
      x.data.assign(p.begin(), p.end());
      return weighted_sum(ops::sigmoid_fwd(x), coeffs.data);
    };
    CHECK(check_against(f, in, analytic).report.ok());
  }
}

TEST_CASE("maxpool gradient passes finite differences when winners are clear") {
  Rng rng(41);
  auto in = random_uniform<double>(rng, {1, 2, 4, 4}, -1, 1);
  // spread each 2x2 window so no two entries are within reach of the probe step
  for (std::size_t i = 0; i < in.numel(); i += 4) {
    in.data[i + 1] += 0.2;
    in.data[i + 2] -= 0.2;
    in.data[i + 3] += 0.4;
  }
  const auto [out, argmax] = ops::maxpool2_fwd(in);
  const auto coeffs = coeff_tensor(out.shape, rng);
  const auto analytic = ops::maxpool2_bwd(coeffs, argmax);
  const auto f = [&](std::span<const double> p) {
    auto x = in;
    x.data.assign(p.begin(), p.end());
    return weighted_sum(ops::maxpool2_fwd(x).first, coeffs.data);
  };
  CHECK(check_against(f, in, analytic).report.ok());
}

TEST_CASE("upsample gradient passes finite differences") {
  Rng rng(43);
  const auto in = random_uniform<double>(rng, {2, 2, 3, 3}, -1, 1);
  const auto out = ops::upsample2_fwd(in);
  const auto coeffs = coeff_tensor(out.shape, rng);
  const auto analytic = ops::upsample2_bwd(coeffs);
  const auto f = [&](std::span<const double> p) {
    auto x = in;
    x.data.assign(p.begin(), p.end());
    return weighted_sum(ops::upsample2_fwd(x), coeffs.data);
  };
  CHECK(check_against(f, in, analytic).report.ok());
}

TEST_CASE("loss gradients pass finite differences") {
  Rng rng(47);
  const auto target = random_uniform<double>(rng, {8}, 0, 1);
  SUBCASE("bce") {
    const auto pred = random_uniform<double>(rng, {8}, 0.1, 0.9);
    const auto r = ops::bce_loss(pred, target);
    const auto f = [&](std::span<const double> p) {
      auto x = pred;
      x.data.assign(p.begin(), p.end());
      return ops::bce_loss(x, target).value;
    };
    CHECK(check_against(f, pred, r.grad).report.ok());
  }
  SUBCASE("mse") {
    const auto pred = random_uniform<double>(rng, {8}, -2, 2);
    const auto r = ops::mse_loss(pred, target);
    const auto f = [&](std::span<const double> p) {
      auto x = pred;
      x.data.assign(p.begin(), p.end());
      return ops::mse_loss(x, target).value;
    };
    CHECK(check_against(f, pred, r.grad).report.ok());
  }
}

TEST_CASE("a composite stack checks end to end") {
  // conv -> relu -> pool -> fc -> sigmoid -> bce, gradient w.r.t. conv weight
  Rng rng(53);
  const auto in = random_uniform<double>(rng, {2, 1, 4, 4}, -1, 1);
  const auto cw = random_uniform<double>(rng, {2, 1, 3, 3}, -0.5, 0.5);
  const auto cb = random_uniform<double>(rng, {2}, -0.1, 0.1);
  const auto fw = random_uniform<double>(rng, {1, 8}, -0.5, 0.5);
  const auto fb = random_uniform<double>(rng, {1}, -0.1, 0.1);
  const auto target = random_uniform<double>(rng, {2, 1}, 0, 1);

  const auto forward = [&](const Tensor64d& w) {
    auto a = ops::conv2d_fwd(in, w, cb);
    auto r = ops::relu_fwd(a);
    auto [p, am] = ops::maxpool2_fwd(r);
    Tensor64d flat = p;
    flat.shape = {2, 8};
    auto z = ops::fc_fwd(flat, fw, fb);
    auto s = ops::sigmoid_fwd(z);
    return std::tuple{ops::bce_loss(s, target), a, r, am, flat, z, s};
  };

  auto [loss, a, r, am, flat, z, s] = forward(cw);
  auto gs = ops::sigmoid_bwd(loss.grad, s);
  auto gfc = ops::fc_bwd(gs, flat, fw);
  Tensor64d gp = gfc.input;
  gp.shape = {2, 2, 2, 2};
  auto gr = ops::maxpool2_bwd(gp, am);
  auto ga = ops::relu_bwd(gr, a);
  auto gconv = ops::conv2d_bwd(ga, in, cw);

  const auto f = [&](std::span<const double> p) {
    auto w = cw;
    w.data.assign(p.begin(), p.end());
    return std::get<0>(forward(w)).value;
  };
  CHECK(check_against(f, cw, gconv.weight).report.ok());
}

TEST_CASE("a corrupted gradient is flagged") {
  Rng rng(59);
  const auto in = random_uniform<double>(rng, {2, 4}, -1, 1);
  const auto w = random_uniform<double>(rng, {3, 4}, -1, 1);
  const auto b = random_uniform<double>(rng, {3}, -1, 1);
  const auto coeffs = coeff_tensor({2, 3}, rng);
  auto grads = ops::fc_bwd(coeffs, in, w);
  grads.weight.data[5] *= 1.1;  // 10% error must trip the 1e-4 threshold
  const auto f = [&](std::span<const double> p) {
    auto x = w;
    x.data.assign(p.begin(), p.end());
    return weighted_sum(ops::fc_fwd(in, x, b), coeffs.data);
  };
  const auto rep = check_against(f, w, grads.weight).report;
  CHECK_FALSE(rep.ok());
  CHECK(rep.max_rel_err > 1e-2);
  CHECK(rep.worst_index == 5);
}

TEST_CASE("grad_check validates input sizes") {
  const auto f = [](std::span<const double>) { return 0.0; };
  std::vector<double> point{1.0, 2.0};
  const std::vector<double> analytic{0.0};
  CHECK_THROWS_AS(grad_check(f, point, analytic), ValidationError);
}
