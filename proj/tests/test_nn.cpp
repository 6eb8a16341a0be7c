#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "dgrd/nn.hpp"

using namespace dgrd;

namespace {

Mat random_batch(int rows, int cols, Rng& rng) {
  Mat x(rows, cols);
  for (auto& v : x.v) v = 2.0 * rng.uniform01() - 1.0;
  return x;
}

// Scalar objective used by the finite-difference oracle: either a fixed
// random linear functional of the outputs, or the expectile loss of
// (target - output).
struct Objective {
  Mat lin;                      // same shape as output
  std::vector<double> target;   // flattened
  double kappa = 0.7;
  bool expectile = false;

  double value(const MlpParams& p, const Mat& x) const {
    const Mat out = mlp_forward(p, x);
    if (!expectile) {
      double acc = 0.0;
      for (size_t i = 0; i < out.v.size(); ++i) acc += lin.v[i] * out.v[i];
      return acc;
    }
    std::vector<double> u(out.v.size());
    for (size_t i = 0; i < out.v.size(); ++i) u[i] = target[i] - out.v[i];
    return expectile_loss(u, kappa, nullptr);
  }

  Mat dout(const Mat& out) const {
    Mat d(out.rows, out.cols);
    if (!expectile) {
      d.v = lin.v;
      return d;
    }
    std::vector<double> u(out.v.size());
    for (size_t i = 0; i < out.v.size(); ++i) u[i] = target[i] - out.v[i];
    std::vector<double> du;
    expectile_loss(u, kappa, &du);
    for (size_t i = 0; i < out.v.size(); ++i) d.v[i] = -du[i];
    return d;
  }
};

// Central finite differences over every parameter tensor; h = 1e-4 in 64-bit.
void gradcheck(MlpParams& p, const Mat& x, const Objective& obj, double tol) {
  ForwardCache cache;
  const Mat out = mlp_forward(p, x, cache);
  MlpGrads grads = make_grads_like(p);
  mlp_backward(p, cache, obj.dout(out), grads);

  const double h = 1e-4;
  auto tensors = tensor_list(p);
  auto grad_tensors = tensor_list(grads.shape);
  for (size_t ti = 0; ti < tensors.size(); ++ti) {
    std::vector<double>& tensor = *tensors[ti];
    const std::vector<double>& analytic = *grad_tensors[ti];
    for (size_t i = 0; i < tensor.size(); ++i) {
      const double keep = tensor[i];
      tensor[i] = keep + h;
      const double up = obj.value(p, x);
      tensor[i] = keep - h;
      const double down = obj.value(p, x);
      tensor[i] = keep;
      const double fd = (up - down) / (2.0 * h);
      const double denom = std::max({std::abs(fd), std::abs(analytic[i]), 1e-3});
      CHECK(std::abs(fd - analytic[i]) / denom <= tol);
    }
  }
}

}  // namespace

TEST_CASE("identity linear network reproduces its input") {
  Rng rng(1);
  MlpParams p = make_mlp({3, 3}, false, rng);
  // overwrite with identity weights, zero bias
  for (auto& v : p.w[0].v) v = 0.0;
  for (int i = 0; i < 3; ++i) p.w[0].at(i, i) = 1.0;

  Mat x = random_batch(5, 3, rng);
  const Mat y = mlp_forward(p, x);
  CHECK(y.v == x.v);
}

TEST_CASE("gelu fixes zero and matches the exact gaussian form") {
  CHECK(gelu(0.0) == 0.0);
  CHECK(gelu(1.0) == doctest::Approx(0.8413447460685429).epsilon(1e-12));
  CHECK(gelu(-1.0) == doctest::Approx(-0.15865525393145707).epsilon(1e-12));
  CHECK(gelu_grad(0.0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("identical rows give identical outputs") {
  Rng rng(2);
  const MlpParams p = make_mlp({4, 8, 8, 2}, true, rng);
  Mat x(2, 4);
  for (int j = 0; j < 4; ++j) {
    x.at(0, j) = 0.3 * j - 0.5;
    x.at(1, j) = 0.3 * j - 0.5;
  }
  const Mat y = mlp_forward(p, x);
  for (int j = 0; j < 2; ++j) CHECK(y.at(0, j) == y.at(1, j));
}

TEST_CASE("input shape mismatch is rejected") {
  Rng rng(3);
  const MlpParams p = make_mlp({4, 6, 2}, true, rng);
  Mat x(1, 5);
  CHECK_THROWS_AS(mlp_forward(p, x), ContractError);
}

TEST_CASE("analytic gradients match finite differences") {
  for (uint64_t seed : {11ULL, 12ULL, 13ULL}) {
    Rng rng(seed);
    MlpParams p = make_mlp({5, 7, 3}, true, rng);
    const Mat x = random_batch(4, 5, rng);

    Objective lin_obj;
    lin_obj.lin = random_batch(4, 3, rng);
    gradcheck(p, x, lin_obj, 1e-4);

    Objective exp_obj;
    exp_obj.expectile = true;
    exp_obj.kappa = 0.7;
    exp_obj.target.resize(12);
    for (auto& t : exp_obj.target) t = 2.0 * rng.uniform01() - 1.0;
    gradcheck(p, x, exp_obj, 1e-4);
  }
}

TEST_CASE("gradients without layer norm also match finite differences") {
  Rng rng(21);
  MlpParams p = make_mlp({5, 6, 4, 2}, false, rng);
  const Mat x = random_batch(3, 5, rng);
  Objective obj;
  obj.lin = random_batch(3, 2, rng);
  gradcheck(p, x, obj, 1e-4);
}

TEST_CASE("zero output gradient gives zero parameter gradients") {
  Rng rng(4);
  MlpParams p = make_mlp({4, 6, 3}, true, rng);
  const Mat x = random_batch(5, 4, rng);
  ForwardCache cache;
  mlp_forward(p, x, cache);
  MlpGrads grads = make_grads_like(p);
  mlp_backward(p, cache, Mat(5, 3), grads);
  for (const auto* t : tensor_list(grads.shape)) {
    for (double v : *t) CHECK(v == 0.0);
  }
}

TEST_CASE("backward is linear in the output gradient") {
  Rng rng(5);
  MlpParams p = make_mlp({4, 6, 2}, true, rng);
  const Mat x = random_batch(3, 4, rng);
  ForwardCache cache;
  mlp_forward(p, x, cache);

  Mat dout = random_batch(3, 2, rng);
  MlpGrads g1 = make_grads_like(p);
  mlp_backward(p, cache, dout, g1);

  Mat dout_scaled = dout;
  for (auto& v : dout_scaled.v) v *= -2.5;
  MlpGrads g2 = make_grads_like(p);
  mlp_backward(p, cache, dout_scaled, g2);

  const auto t1 = tensor_list(g1.shape);
  const auto t2 = tensor_list(g2.shape);
  for (size_t ti = 0; ti < t1.size(); ++ti) {
    for (size_t i = 0; i < t1[ti]->size(); ++i) {
      CHECK((*t2[ti])[i] == doctest::Approx(-2.5 * (*t1[ti])[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  Rng rng(6);
  MlpParams p = make_mlp({3, 4, 2}, true, rng);
  const MlpParams before = p;
  AdamState opt = make_adam(p, 1e-3);
  const MlpGrads zero = make_grads_like(p);
  adam_step(p, zero, opt);
  CHECK(opt.step == 1);
  const auto ta = tensor_list(p);
  const auto tb = tensor_list(before);
  for (size_t ti = 0; ti < ta.size(); ++ti) CHECK(*ta[ti] == *tb[ti]);
}

TEST_CASE("adam first step moves a scalar by the learning rate") {
  Rng rng(7);
  MlpParams p = make_mlp({1, 1}, false, rng);
  const double w0 = p.w[0].v[0];
  AdamState opt = make_adam(p, 0.01);
  MlpGrads g = make_grads_like(p);
  g.shape.w[0].v[0] = 3.7;  // constant nonzero gradient
  adam_step(p, g, opt);
  // bias-corrected mhat/sqrt(vhat) == sign(g) up to eps
  CHECK(std::abs(p.w[0].v[0] - (w0 - 0.01)) <= 1e-7);
}

TEST_CASE("adam is pure given copied state") {
  Rng rng(8);
  MlpParams p1 = make_mlp({3, 5, 2}, true, rng);
  MlpParams p2 = p1;
  AdamState o1 = make_adam(p1, 1e-3);
  AdamState o2 = o1;
  MlpGrads g = make_grads_like(p1);
  for (auto* t : tensor_list(g.shape)) {
    for (auto& v : *t) v = 0.25;
  }
  adam_step(p1, g, o1);
  adam_step(p2, g, o2);
  const auto ta = tensor_list(p1);
  const auto tb = tensor_list(p2);
  for (size_t ti = 0; ti < ta.size(); ++ti) CHECK(*ta[ti] == *tb[ti]);
}

TEST_CASE("adam rejects non-finite gradients without touching parameters") {
  Rng rng(9);
  MlpParams p = make_mlp({2, 3, 1}, false, rng);
  const MlpParams before = p;
  AdamState opt = make_adam(p, 1e-3);
  MlpGrads g = make_grads_like(p);
  g.shape.w[0].v[1] = std::nan("");
  CHECK_THROWS_AS(adam_step(p, g, opt), NumericFault);
  CHECK(opt.step == 0);
  const auto ta = tensor_list(p);
  const auto tb = tensor_list(before);
  for (size_t ti = 0; ti < ta.size(); ++ti) CHECK(*ta[ti] == *tb[ti]);
}

TEST_CASE("ema identities") {
  Rng rng(10);
  MlpParams source = make_mlp({2, 4, 1}, true, rng);

  // tau = 1 copies the source
  TargetCopy full = make_target(make_mlp({2, 4, 1}, true, rng), 1.0);
  ema_update(full, source);
  const auto ts = tensor_list(source);
  const auto tf = tensor_list(full.shadow);
  for (size_t ti = 0; ti < ts.size(); ++ti) CHECK(*tf[ti] == *ts[ti]);

  // shadow == source is a fixed point
  TargetCopy fixed = make_target(source, 0.005);
  ema_update(fixed, source);
  const auto tx = tensor_list(fixed.shadow);
  for (size_t ti = 0; ti < ts.size(); ++ti) {
    for (size_t i = 0; i < ts[ti]->size(); ++i) {
      CHECK((*tx[ti])[i] == doctest::Approx((*ts[ti])[i]).epsilon(1e-15));
    }
  }

  // contraction: ||shadow' - source|| == (1-tau) * ||shadow - source||
  Rng rng2(11);
  TargetCopy half = make_target(make_mlp({2, 4, 1}, true, rng2), 0.5);
  double before = 0.0;
  {
    const auto th = tensor_list(half.shadow);
    for (size_t ti = 0; ti < ts.size(); ++ti) {
      for (size_t i = 0; i < ts[ti]->size(); ++i) {
        const double d = (*th[ti])[i] - (*ts[ti])[i];
        before += d * d;
      }
    }
  }
  ema_update(half, source);
  double after = 0.0;
  {
    const auto th = tensor_list(half.shadow);
    for (size_t ti = 0; ti < ts.size(); ++ti) {
      for (size_t i = 0; i < ts[ti]->size(); ++i) {
        const double d = (*th[ti])[i] - (*ts[ti])[i];
        after += d * d;
      }
    }
  }
  CHECK(std::sqrt(after) == doctest::Approx(0.5 * std::sqrt(before)).epsilon(1e-12));
}

TEST_CASE("ema scalar example: tau 0.5 halves the gap") {
  Rng rng(12);
  MlpParams source = make_mlp({1, 1}, false, rng);
  source.w[0].v[0] = 2.0;
  source.b[0][0] = 2.0;
  MlpParams shadow = source;
  shadow.w[0].v[0] = 0.0;
  shadow.b[0][0] = 0.0;
  TargetCopy t{shadow, 0.5};
  ema_update(t, source);
  CHECK(t.shadow.w[0].v[0] == 1.0);
  CHECK(t.shadow.b[0][0] == 1.0);
}

TEST_CASE("expectile loss closed-form values") {
  std::vector<double> grad;
  CHECK(expectile_loss({2.0}, 0.5, &grad) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(expectile_loss({1.0}, 0.7, nullptr) == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(expectile_loss({-1.0}, 0.7, nullptr) == doctest::Approx(0.3).epsilon(1e-15));

  // kappa = 0.5 is exactly half squared error
  Rng rng(13);
  std::vector<double> u(64);
  for (auto& x : u) x = 4.0 * rng.uniform01() - 2.0;
  double half_mse = 0.0;
  for (double x : u) half_mse += 0.5 * x * x;
  half_mse /= static_cast<double>(u.size());
  CHECK(expectile_loss(u, 0.5, nullptr) == half_mse);

  // u == 0 takes weight kappa (the u > 0 branch limit)
  CHECK(expectile_weight(0.0, 0.7) == 0.7);
  CHECK(expectile_weight(1e-300, 0.7) == 0.7);
  CHECK(expectile_weight(-1e-300, 0.7) == doctest::Approx(0.3));

  CHECK_THROWS_AS(expectile_loss({1.0}, 0.0, nullptr), ContractError);
  CHECK_THROWS_AS(expectile_loss({}, 0.5, nullptr), ContractError);
}

TEST_CASE("expectile gradient matches finite differences") {
  Rng rng(14);
  std::vector<double> u(16);
  for (auto& x : u) x = 2.0 * rng.uniform01() - 1.0;
  std::vector<double> grad;
  expectile_loss(u, 0.7, &grad);
  const double h = 1e-6;
  for (size_t i = 0; i < u.size(); ++i) {
    auto up = u, down = u;
    up[i] += h;
    down[i] -= h;
    const double fd =
        (expectile_loss(up, 0.7, nullptr) - expectile_loss(down, 0.7, nullptr)) / (2.0 * h);
    CHECK(grad[i] == doctest::Approx(fd).epsilon(1e-5));
  }
}

TEST_CASE("initialization is deterministic per seed and finite") {
  Rng a(15), b(15), c(16);
  const MlpParams p1 = make_mlp({6, 8, 4}, true, a);
  const MlpParams p2 = make_mlp({6, 8, 4}, true, b);
  const MlpParams p3 = make_mlp({6, 8, 4}, true, c);
  CHECK(p1.w[0].v == p2.w[0].v);
  CHECK(p1.w[0].v != p3.w[0].v);
  CHECK(all_finite(p1));

  // fan-scaled range
  const double lim = std::sqrt(6.0 / (6 + 8));
  for (double v : p1.w[0].v) {
    CHECK(std::abs(v) <= lim);
  }
}

TEST_CASE("checkpoint round trip is bitwise") {
  Rng rng(17);
  const MlpParams p = make_mlp({5, 9, 3}, true, rng);
  const std::string path = "ck_test.ck";
  save_mlp_checkpoint(path, p);
  const MlpParams q = load_mlp_checkpoint(path);
  CHECK(q.sizes == p.sizes);
  CHECK(q.layer_norm == p.layer_norm);
  const auto tp = tensor_list(p);
  const auto tq = tensor_list(q);
  for (size_t ti = 0; ti < tp.size(); ++ti) CHECK(*tp[ti] == *tq[ti]);
  std::filesystem::remove(path);
}
