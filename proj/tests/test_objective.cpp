#include <cmath>
#include <cstring>
#include <random>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "grad_check.hpp"
#include "sanet/objective.hpp"
#include "sanet/rng.hpp"

using namespace sanet;
using sanet_tests::random_tensor;

TEST_SUITE_BEGIN("objective");

TEST_CASE("normalize_attribute") {
  NormalizedAttribute a = normalize_attribute(Tensor(Shape{1, 2}, {0.0, 1.0}));
  CHECK(a.z_tilde[0] == -1.0);
  CHECK(a.z_tilde[1] == 1.0);
  CHECK(a.mean == 0.5);
  CHECK(a.std == 0.5);

  std::mt19937_64 gen(21);
  Tensor z = random_tensor(Shape{4, 4}, gen, 0.0, 1.0);
  NormalizedAttribute b = normalize_attribute(z);
  double mean = 0.0, var = 0.0;
  for (std::size_t i = 0; i < 16; ++i) mean += b.z_tilde[i];
  mean /= 16.0;
  for (std::size_t i = 0; i < 16; ++i)
    var += (b.z_tilde[i] - mean) * (b.z_tilde[i] - mean);
  var /= 16.0;
  CHECK(std::fabs(mean) <= 1e-12);
  CHECK(std::fabs(var - 1.0) <= 1e-12);

  CHECK_THROWS_AS((void)normalize_attribute(Tensor::full(Shape{2, 2}, 0.3)),
                  std::invalid_argument);
}

TEST_CASE("accuracy loss worked examples") {
  LossConfig cfg;
  std::vector<Tensor> y = {Tensor(Shape{1, 1}, {2.0})};
  std::vector<Tensor> yhat = {Tensor(Shape{1, 1}, {1.0})};
  CHECK(accuracy_loss(y, yhat, cfg) == 3.5);  // 1 + 10 * 0.25

  CHECK(accuracy_loss(y, y, cfg) == 0.0);

  // below the filter only the squared term contributes
  std::vector<Tensor> ylow = {Tensor(Shape{1, 1}, {0.05})};
  std::vector<Tensor> plow = {Tensor(Shape{1, 1}, {3.0})};
  CHECK(accuracy_loss(ylow, plow, cfg) == (0.05 - 3.0) * (0.05 - 3.0));
}

TEST_CASE("fairness loss worked examples") {
  LossConfig cfg;
  Tensor z_tilde(Shape{1, 2}, {-1.0, 1.0});
  // percentage errors 0.5 and 0.1
  std::vector<Tensor> y = {Tensor(Shape{1, 2}, {2.0, 10.0})};
  std::vector<Tensor> yhat = {Tensor(Shape{1, 2}, {1.0, 9.0})};
  CHECK(fairness_inner_sum(y, yhat, z_tilde, cfg) == -0.4);
  CHECK(fairness_loss(y, yhat, z_tilde, cfg) == 0.4);

  // symmetric errors cancel
  std::vector<Tensor> ys = {Tensor(Shape{1, 2}, {2.0, 2.0})};
  std::vector<Tensor> ps = {Tensor(Shape{1, 2}, {1.0, 1.0})};
  CHECK(fairness_loss(ys, ps, z_tilde, cfg) == 0.0);

  CHECK(fairness_loss(y, y, z_tilde, cfg) == 0.0);
}

TEST_CASE("fairness loss vanishes under group-symmetric errors") {
  LossConfig cfg;
  NormalizedAttribute a =
      normalize_attribute(Tensor(Shape{2, 2}, {0.0, 0.0, 1.0, 1.0}));
  // identical percentage error 0.3 everywhere: z_tilde sums to zero
  std::vector<Tensor> y = {Tensor(Shape{2, 2}, {10.0, 10.0, 10.0, 10.0})};
  std::vector<Tensor> yhat = {Tensor(Shape{2, 2}, {7.0, 7.0, 7.0, 7.0})};
  CHECK(fairness_loss(y, yhat, a.z_tilde, cfg) == 0.0);
}

TEST_CASE("total loss composes accuracy and fairness") {
  LossConfig cfg;
  cfg.gamma = 10.0;
  std::vector<Tensor> yacc = {Tensor(Shape{1, 1}, {2.0})};
  std::vector<Tensor> pacc = {Tensor(Shape{1, 1}, {1.0})};
  Tensor z_tilde(Shape{1, 2}, {-1.0, 1.0});
  std::vector<Tensor> yfair = {Tensor(Shape{1, 2}, {2.0, 10.0})};
  std::vector<Tensor> pfair = {Tensor(Shape{1, 2}, {1.0, 9.0})};
  const double acc = accuracy_loss(yacc, pacc, cfg);
  const double fair = fairness_loss(yfair, pfair, z_tilde, cfg);
  CHECK(acc == 3.5);
  CHECK(fair == 0.4);
  CHECK(acc + cfg.gamma * fair == 7.5);

  std::mt19937_64 gen(22);
  std::vector<Tensor> y, yhat;
  for (int t = 0; t < 3; ++t) {
    y.push_back(random_tensor(Shape{1, 2}, gen, 0.0, 6.0));
    yhat.push_back(random_tensor(Shape{1, 2}, gen, 0.0, 6.0));
  }
  CHECK(total_loss(y, yhat, z_tilde, cfg) ==
        accuracy_loss(y, yhat, cfg) +
            cfg.gamma * fairness_loss(y, yhat, z_tilde, cfg));
  LossConfig zero = cfg;
  zero.gamma = 0.0;
  CHECK(total_loss(y, yhat, z_tilde, zero) == accuracy_loss(y, yhat, cfg));
  CHECK(total_loss(y, yhat, z_tilde, cfg) >= 0.0);
}

TEST_CASE("accuracy loss is permutation invariant over the batch") {
  std::mt19937_64 gen(23);
  LossConfig cfg;
  std::vector<Tensor> y, yhat;
  for (int t = 0; t < 6; ++t) {
    y.push_back(random_tensor(Shape{2, 2}, gen, 0.0, 5.0));
    yhat.push_back(random_tensor(Shape{2, 2}, gen, 0.0, 5.0));
  }
  const double base = accuracy_loss(y, yhat, cfg);
  std::vector<std::size_t> order = {3, 1, 5, 0, 4, 2};
  std::vector<Tensor> yp, pp;
  for (std::size_t i : order) {
    yp.push_back(y[i]);
    pp.push_back(yhat[i]);
  }
  CHECK(accuracy_loss(yp, pp, cfg) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("taped losses match the plain functions bitwise") {
  std::mt19937_64 gen(24);
  LossConfig cfg;
  cfg.gamma = 7.0;
  Tensor z_tilde =
      normalize_attribute(random_tensor(Shape{3, 3}, gen, 0.0, 1.0)).z_tilde;
  std::vector<Tensor> y, preds;
  for (int t = 0; t < 4; ++t) {
    Tensor yt = random_tensor(Shape{3, 3}, gen, 0.0, 5.0);
    yt[static_cast<std::size_t>(t)] = 0.05;  // keep some cells filtered
    y.push_back(yt);
    preds.push_back(random_tensor(Shape{3, 3}, gen, 0.0, 5.0));
  }

  Tape tape;
  std::vector<Var> yhat;
  for (const Tensor& p : preds) yhat.push_back(tape.leaf(p, true));

  const double acc = tape.value(accuracy_loss_op(yhat, y, cfg))[0];
  const double pacc = accuracy_loss(y, preds, cfg);
  CHECK(std::memcmp(&acc, &pacc, sizeof(double)) == 0);
  const double inner = tape.value(fairness_inner_op(yhat, y, z_tilde, cfg))[0];
  const double pinner = fairness_inner_sum(y, preds, z_tilde, cfg);
  CHECK(inner == pinner);
  const double tot = tape.value(total_loss_op(yhat, y, z_tilde, cfg))[0];
  CHECK(tot == total_loss(y, preds, z_tilde, cfg));

  LossConfig zero = cfg;
  zero.gamma = 0.0;
  const double tot0 = tape.value(total_loss_op(yhat, y, z_tilde, zero))[0];
  CHECK(tot0 == acc);
}

TEST_CASE("loss gradients match finite differences") {
  std::mt19937_64 gen(25);
  std::vector<Tensor> y;
  std::vector<Tensor> preds;
  for (int t = 0; t < 2; ++t) {
    Tensor yt = random_tensor(Shape{3, 3}, gen, 0.5, 5.0);
    yt[static_cast<std::size_t>(4 * t)] = 0.05;
    y.push_back(yt);
    preds.push_back(random_tensor(Shape{3, 3}, gen, 0.5, 5.0));
  }
  Tensor z_tilde =
      normalize_attribute(random_tensor(Shape{3, 3}, gen, 0.0, 1.0)).z_tilde;

  LossConfig cfg;
  auto acc_build = [&](Tape& t, const std::vector<Var>& leaves) {
    return accuracy_loss_op(leaves, y, cfg);
  };
  auto res = sanet_tests::grad_check(preds, acc_build, 60, 501);
  CHECK(res.checked >= 18);
  CHECK(res.max_rel_err < 1e-5);

  LossConfig fcfg;
  fcfg.gamma = 10.0;
  const double inner = fairness_inner_sum(y, preds, z_tilde, fcfg);
  REQUIRE(std::fabs(inner) > 1e-3);  // away from the |.| kink
  auto tot_build = [&](Tape& t, const std::vector<Var>& leaves) {
    return total_loss_op(leaves, y, z_tilde, fcfg);
  };
  auto tres = sanet_tests::grad_check(preds, tot_build, 60, 502);
  CHECK(tres.max_rel_err < 1e-5);

  // flip the inner-sum sign with swapped predictions scaled up
  std::vector<Tensor> preds2 = preds;
  for (Tensor& p : preds2)
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = 6.0 - p[i];
  const double inner2 = fairness_inner_sum(y, preds2, z_tilde, fcfg);
  REQUIRE(std::fabs(inner2) > 1e-3);
  CHECK(((inner > 0.0) != (inner2 > 0.0)));
  auto tres2 = sanet_tests::grad_check(preds2, tot_build, 60, 503);
  CHECK(tres2.max_rel_err < 1e-5);
}

TEST_CASE("loss input validation") {
  LossConfig cfg;
  std::vector<Tensor> y = {Tensor(Shape{1, 2}, {1.0, 2.0})};
  std::vector<Tensor> bad = {Tensor(Shape{2, 1}, {1.0, 2.0})};
  CHECK_THROWS_AS((void)accuracy_loss(y, bad, cfg), std::invalid_argument);
  CHECK_THROWS_AS((void)accuracy_loss({}, {}, cfg), std::invalid_argument);
  Tensor z(Shape{1, 3}, {-1.0, 0.0, 1.0});
  CHECK_THROWS_AS((void)fairness_loss(y, y, z, cfg), std::invalid_argument);
}

TEST_SUITE_END();
