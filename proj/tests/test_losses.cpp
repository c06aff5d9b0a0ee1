#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "losses.hpp"
#include "oracles.hpp"
#include "physics.hpp"
#include "rng.hpp"
#include "support.hpp"

using namespace udehaze;
using testsupport::gradcheck;
using testsupport::rand_tensor;

TEST_CASE("dct basis is orthonormal") {
  for (int n : {8, 16, 32}) {
    const auto& b = dct_basis(n);
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int k = 0; k < n; ++k) acc += b[k * n + i] * b[k * n + j];
        worst = std::max(worst, std::fabs(acc - (i == j ? 1.0 : 0.0)));
      }
    }
    CHECK(worst < 1e-10);
  }
  CHECK_THROWS(dct_basis(12));
}

TEST_CASE("dct2_patch values") {
  // zero patch -> zero coefficients
  auto zeros = dct2_patch(std::vector<double>(64, 0.0), 8);
  for (double v : zeros) CHECK(v == 0.0);

  // constant patch: DC = n*c, everything else 0
  auto flat = dct2_patch(std::vector<double>(64, 0.3), 8);
  CHECK(flat[0] == doctest::Approx(8.0 * 0.3).epsilon(1e-12));
  for (size_t i = 1; i < flat.size(); ++i) CHECK(std::fabs(flat[i]) < 1e-12);

  // Parseval: coefficient norm equals patch norm
  Rng rng(3);
  for (int n : {8, 16, 32}) {
    std::vector<double> patch(static_cast<size_t>(n) * n);
    for (double& v : patch) v = rng.uniform(-1.0, 1.0);
    auto coeff = dct2_patch(patch, n);
    double np = 0.0, nc = 0.0;
    for (double v : patch) np += v * v;
    for (double v : coeff) nc += v * v;
    CHECK(std::fabs(std::sqrt(np) - std::sqrt(nc)) < 1e-9);
  }

  // matches the direct cosine-sum oracle
  std::vector<double> patch(256);
  for (double& v : patch) v = rng.uniform(0.0, 1.0);
  auto got = dct2_patch(patch, 16);
  auto expect = oracles::dct2_direct(patch, 16);
  for (size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(expect[i]).epsilon(1e-10));
}

TEST_CASE("loss_l1 values") {
  Rng rng(1);
  auto j = rand_tensor(rng, {1, 3, 4, 4}, 0.0, 1.0, false);
  CHECK(loss_l1(j, j)->item() == 0.0);

  auto offset = add_scalar(j, 0.1);
  CHECK(loss_l1(offset, j)->item() == doctest::Approx(0.1).epsilon(1e-12));

  // half the pixels offset by 0.2 -> mean 0.1
  auto a = Tensor::create({1, 1, 2, 2}, {0.1, 0.1, 0.1, 0.1});
  auto b = Tensor::create({1, 1, 2, 2}, {0.3, 0.3, 0.1, 0.1});
  CHECK(loss_l1(a, b)->item() == doctest::Approx(0.1).epsilon(1e-15));
}

TEST_CASE("loss_dct values") {
  LossConfig cfg;

  SUBCASE("identical inputs give zero") {
    Rng rng(5);
    auto j = rand_tensor(rng, {1, 3, 32, 32}, 0.0, 1.0, false);
    CHECK(loss_dct(j, j, cfg)->item() == 0.0);
  }

  SUBCASE("constant difference on a 32x32 image gives 4.56") {
    auto j = Tensor::full({1, 3, 32, 32}, 0.5);
    auto g = Tensor::full({1, 3, 32, 32}, 0.4);
    // only the DC coefficient differs: per-patch L1 = s * 0.1 at scale s
    CHECK(loss_dct(j, g, cfg)->item() == doctest::Approx(4.56).epsilon(1e-9));
  }

  SUBCASE("difference confined to one 8x8 tile matches the brute-force oracle") {
    Rng rng(6);
    auto j = rand_tensor(rng, {1, 3, 64, 64}, 0.2, 0.8, false);
    auto g = Tensor::create(j->shape, j->data);
    for (int y = 8; y < 16; ++y)
      for (int x = 24; x < 32; ++x) g->data[static_cast<size_t>(y) * 64 + x] += 0.17;
    const double got = loss_dct(j, g, cfg)->item();
    const double expect = oracles::dct_loss_brute_force(*j, *g, cfg);
    CHECK(got == doctest::Approx(expect).epsilon(1e-9));
  }

  SUBCASE("random batch matches the brute-force oracle") {
    Rng rng(7);
    auto j = rand_tensor(rng, {2, 3, 32, 32}, 0.0, 1.0, false);
    auto g = rand_tensor(rng, {2, 3, 32, 32}, 0.0, 1.0, false);
    CHECK(loss_dct(j, g, cfg)->item() ==
          doctest::Approx(oracles::dct_loss_brute_force(*j, *g, cfg)).epsilon(1e-9));
  }

  SUBCASE("indivisible dimensions are rejected") {
    auto j = Tensor::full({1, 3, 24, 24}, 0.5);
    CHECK_THROWS(loss_dct(j, j, cfg));
  }
}

TEST_CASE("loss_fwd values") {
  Rng rng(11);
  auto i = rand_tensor(rng, {1, 3, 4, 4}, 0.1, 0.9, false);
  auto j = rand_tensor(rng, {1, 3, 4, 4}, 0.1, 0.9, false);
  auto a = Tensor::create({1, 3}, {0.5, 0.6, 0.7});

  // t == 1 reduces to l1(J, I)
  auto ones_t = Tensor::full({1, 3, 4, 4}, 1.0);
  CHECK(loss_fwd(i, j, ones_t, a)->item() ==
        doctest::Approx(l1_distance(j, i)->item()).epsilon(1e-12));

  // J = A collapses to mean |A - I|
  auto j_is_a = Tensor::create({1, 3, 1, 1}, {0.5, 0.6, 0.7});
  auto i_small = rand_tensor(rng, {1, 3, 1, 1}, 0.0, 1.0, false);
  auto t_any = rand_tensor(rng, {1, 3, 1, 1}, 0.1, 1.0, false);
  double expect = 0.0;
  for (int c = 0; c < 3; ++c) expect += std::fabs(a->data[c] - i_small->data[c]);
  expect /= 3.0;
  CHECK(loss_fwd(i_small, j_is_a, t_any, a)->item() == doctest::Approx(expect).epsilon(1e-12));

  // true scene gives zero up to floating point
  auto t = rand_tensor(rng, {1, 3, 4, 4}, 0.2, 1.0, false);
  auto i_true = forward_model(j, t, a);
  auto i_const = Tensor::create(i_true->shape, i_true->data);
  CHECK(loss_fwd(i_const, j, t, a)->item() < 1e-9);
}

TEST_CASE("loss_a_reg values") {
  LossConfig cfg;
  auto i_mean = Tensor::create({1, 3}, {0.2, 0.3, 0.4});

  SUBCASE("well-ordered light anchored to the prior costs nothing") {
    auto a = Tensor::create({1, 3}, {0.4, 0.6, 0.8});
    CHECK(loss_a_reg(a, a, i_mean, cfg)->item() == 0.0);
  }

  SUBCASE("a tied channel pair contributes mu1 * eps") {
    auto a = Tensor::create({1, 3}, {0.6, 0.6, 0.8});
    CHECK(loss_a_reg(a, a, i_mean, cfg)->item() ==
          doctest::Approx(0.2 * 0.01).epsilon(1e-12));
  }

  SUBCASE("light below the mean brightness is penalized by mu2") {
    auto a = Tensor::create({1, 3}, {0.4, 0.6, 0.8});
    auto bright = Tensor::create({1, 3}, {0.45, 0.3, 0.4});  // red mean above A_R by 0.05
    CHECK(loss_a_reg(a, a, bright, cfg)->item() ==
          doctest::Approx(0.1 * 0.05).epsilon(1e-12));
  }

  SUBCASE("anchor term is the mean absolute deviation") {
    auto a = Tensor::create({1, 3}, {0.4, 0.6, 0.8});
    auto a_cl = Tensor::create({1, 3}, {0.4, 0.54, 0.8});
    CHECK(loss_a_reg(a, a_cl, i_mean, cfg)->item() ==
          doctest::Approx(0.06 / 3.0).epsilon(1e-12));
  }

  SUBCASE("batch evaluation equals the mean of per-sample evaluations") {
    Rng rng(13);
    auto a = rand_tensor(rng, {4, 3}, 0.3, 1.0, false);
    auto a_cl = rand_tensor(rng, {4, 3}, 0.3, 1.0, false);
    auto im = rand_tensor(rng, {4, 3}, 0.0, 1.0, false);
    double acc = 0.0;
    for (int64_t n = 0; n < 4; ++n) {
      auto an = Tensor::create({1, 3}, {a->data[n * 3], a->data[n * 3 + 1], a->data[n * 3 + 2]});
      auto cn = Tensor::create({1, 3}, {a_cl->data[n * 3], a_cl->data[n * 3 + 1], a_cl->data[n * 3 + 2]});
      auto in = Tensor::create({1, 3}, {im->data[n * 3], im->data[n * 3 + 1], im->data[n * 3 + 2]});
      acc += loss_a_reg(an, cn, in, cfg)->item();
    }
    CHECK(loss_a_reg(a, a_cl, im, cfg)->item() == doctest::Approx(acc / 4.0).epsilon(1e-12));
  }
}

TEST_CASE("loss_beta_reg values") {
  LossConfig cfg;
  CHECK(loss_beta_reg(Tensor::create({3}, {1.0, 0.5, 0.2}), cfg)->item() == 0.0);
  CHECK(loss_beta_reg(Tensor::create({3}, {0.5, 0.5, 0.5}), cfg)->item() ==
        doctest::Approx(0.02).epsilon(1e-12));
  CHECK(loss_beta_reg(Tensor::create({3}, {2.5, 0.5, 0.2}), cfg)->item() ==
        doctest::Approx(0.05).epsilon(1e-12));
  // below the soft lower bound
  CHECK(loss_beta_reg(Tensor::create({3}, {1.0, 0.5, 0.01}), cfg)->item() ==
        doctest::Approx(0.1 * 0.04).epsilon(1e-12));
}

TEST_CASE("loss_total weighting") {
  LossConfig cfg;
  auto zero = Tensor::scalar(0.0);
  CHECK(loss_total(zero, zero, zero, zero, zero, cfg).total->item() == 0.0);

  auto one = Tensor::scalar(1.0);
  auto b = loss_total(one, one, one, one, one, cfg);
  CHECK(b.total->item() == doctest::Approx(3.0).epsilon(1e-12));

  // ablation flag zeroes one weight
  LossConfig ablated = cfg;
  ablated.lambda[1] = 0.0;  // w/o DCT
  auto b2 = loss_total(one, one, one, one, one, ablated);
  CHECK(b2.total->item() == doctest::Approx(2.2).epsilon(1e-12));

  // breakdown stays the exact weighted sum
  Rng rng(17);
  auto terms = rand_tensor(rng, {5}, 0.0, 2.0, false);
  auto br = loss_total(Tensor::scalar(terms->data[0]), Tensor::scalar(terms->data[1]),
                       Tensor::scalar(terms->data[2]), Tensor::scalar(terms->data[3]),
                       Tensor::scalar(terms->data[4]), cfg);
  double expect = 0.0;
  for (int i = 0; i < 5; ++i) expect += cfg.lambda[i] * terms->data[i];
  CHECK(br.total->item() == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("every loss term is nonnegative and differentiable") {
  LossConfig cfg;
  for (uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed * 7 + 2);

    auto j = rand_tensor(rng, {1, 3, 8, 8}, 0.05, 0.95);
    auto g = rand_tensor(rng, {1, 3, 8, 8}, 0.05, 0.95, false);
    CHECK(loss_l1(j, g)->item() >= 0.0);
    CHECK(gradcheck([&] { return loss_l1(j, g); }, {j}) < 1e-4);

    auto j32 = rand_tensor(rng, {1, 3, 32, 32}, 0.0, 1.0, false);
    auto g32 = rand_tensor(rng, {1, 3, 32, 32}, 0.0, 1.0, false);
    CHECK(loss_dct(j32, g32, cfg)->item() >= 0.0);
    auto j8 = rand_tensor(rng, {1, 1, 8, 8}, 0.0, 1.0);
    auto g8 = rand_tensor(rng, {1, 1, 8, 8}, 0.0, 1.0, false);
    CHECK(gradcheck(
              [&] {
                auto d = blockwise_dct2(j8, 8);
                auto dg = blockwise_dct2(g8, 8);
                return mul_scalar(l1_distance(d, dg), 64.0);
              },
              {j8}) < 1e-4);

    auto i = rand_tensor(rng, {1, 3, 4, 4}, 0.1, 0.9, false);
    auto t = rand_tensor(rng, {1, 3, 4, 4}, 0.2, 0.95);
    auto a = rand_tensor(rng, {1, 3}, 0.35, 0.95);
    auto j4 = rand_tensor(rng, {1, 3, 4, 4}, 0.1, 0.9);
    CHECK(loss_fwd(i, j4, t, a)->item() >= 0.0);
    CHECK(gradcheck([&] { return loss_fwd(i, j4, t, a); }, {j4, t, a}) < 1e-4);

    auto a_cl = rand_tensor(rng, {1, 3}, 0.35, 0.95, false);
    auto im = rand_tensor(rng, {1, 3}, 0.0, 0.3, false);
    CHECK(loss_a_reg(a, a_cl, im, cfg)->item() >= 0.0);
    CHECK(gradcheck([&] { return loss_a_reg(a, a_cl, im, cfg); }, {a}) < 1e-4);

    auto beta = rand_tensor(rng, {3}, 0.1, 1.8);
    CHECK(loss_beta_reg(beta, cfg)->item() >= 0.0);
    CHECK(gradcheck([&] { return loss_beta_reg(beta, cfg); }, {beta}) < 1e-4);
  }
}

TEST_CASE("batch evaluation equals the mean of per-sample evaluations") {
  LossConfig cfg;
  Rng rng(41);
  auto j = rand_tensor(rng, {3, 3, 32, 32}, 0.0, 1.0, false);
  auto g = rand_tensor(rng, {3, 3, 32, 32}, 0.0, 1.0, false);
  auto t = rand_tensor(rng, {3, 3, 32, 32}, 0.1, 1.0, false);
  auto a = rand_tensor(rng, {3, 3}, 0.3, 1.0, false);

  double l1_acc = 0.0, dct_acc = 0.0, fwd_acc = 0.0;
  for (int64_t n = 0; n < 3; ++n) {
    auto jn = narrow(j, 0, n, 1);
    auto gn = narrow(g, 0, n, 1);
    auto tn = narrow(t, 0, n, 1);
    auto an = narrow(a, 0, n, 1);
    l1_acc += loss_l1(jn, gn)->item();
    dct_acc += loss_dct(jn, gn, cfg)->item();
    fwd_acc += loss_fwd(gn, jn, tn, an)->item();
  }
  CHECK(loss_l1(j, g)->item() == doctest::Approx(l1_acc / 3.0).epsilon(1e-12));
  CHECK(loss_dct(j, g, cfg)->item() == doctest::Approx(dct_acc / 3.0).epsilon(1e-12));
  CHECK(loss_fwd(g, j, t, a)->item() == doctest::Approx(fwd_acc / 3.0).epsilon(1e-12));
}

TEST_CASE("loss_dct is zero only for identical images") {
  Rng rng(23);
  auto j = rand_tensor(rng, {1, 3, 32, 32}, 0.0, 1.0, false);
  auto g = Tensor::create(j->shape, j->data);
  g->data[100] += 1e-6;
  LossConfig cfg;
  CHECK(loss_dct(j, g, cfg)->item() > 0.0);
}

TEST_CASE("loss_beta_reg zero set matches the declared region") {
  LossConfig cfg;
  Rng rng(29);
  for (int trial = 0; trial < 100; ++trial) {
    const double br = rng.uniform(0.0, 2.2);
    const double bg = rng.uniform(0.0, 2.2);
    const double bb = rng.uniform(0.0, 2.2);
    const double v = loss_beta_reg(Tensor::create({3}, {br, bg, bb}), cfg)->item();
    const bool inside = br >= bg + cfg.eps_margin && bg >= bb + cfg.eps_margin &&
                        br <= 2.0 && bb >= 0.05;
    if (inside) {
      CHECK(v == 0.0);
    } else {
      const bool strictly_outside = br < bg + cfg.eps_margin - 1e-12 ||
                                    bg < bb + cfg.eps_margin - 1e-12 || br > 2.0 + 1e-12 ||
                                    bb < 0.05 - 1e-12;
      if (strictly_outside) CHECK(v > 0.0);
    }
  }
}
