#include <doctest.h>

#include <cmath>

#include "mdt/errors.hpp"
#include "mdt/losses.hpp"
#include "mdt/rng.hpp"
#include "support/oracles.hpp"

using namespace mdt;

namespace {

DiscriminatorOutput const_out(double p, int hp = 4, int wp = 4) {
  return DiscriminatorOutput{Tensor({1, hp, wp}, p), p};
}

Tensor random_small(Rng& rng) {
  Tensor t({2, 2, 2});
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1.0, 1.0);
  return t;
}

// Brute-force mean-abs-diff-and-sum oracle.
double naive_rec(const Tensor& x, const std::vector<Tensor>& recovered) {
  double total = 0.0;
  for (const auto& r : recovered) {
    double s = 0.0;
    for (std::int64_t i = 0; i < x.size(); ++i) s += std::abs(r[i] - x[i]);
    total += s / static_cast<double>(x.size());
  }
  return total;
}

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("adv_loss_d: perfect discriminator scores near zero") {
  const double eps = 1e-7;
  const double v = adv_loss_d(const_out(1.0 - eps), {const_out(eps), const_out(eps)});
  CHECK(v < 1e-5);
  CHECK(v >= 0.0);
}

TEST_CASE("adv_loss_d at the maximal-uncertainty point equals 2 ln 2") {
  const double two_ln2 = 2.0 * std::log(2.0);
  // Independent of the number of fakes and of the patch-map size.
  for (int fakes : {1, 2, 3}) {
    for (int hp : {1, 4, 7}) {
      std::vector<DiscriminatorOutput> f(static_cast<size_t>(fakes), const_out(0.5, hp, hp));
      const double v = adv_loss_d(const_out(0.5, hp, hp), f);
      CHECK(v == doctest::Approx(two_ln2).epsilon(1e-12));
    }
  }
}

TEST_CASE("adv_loss_d: 0.9 real / 0.1 fake case matches direct BCE arithmetic") {
  const double expected = -std::log(0.9) - std::log(1.0 - 0.1);
  const double v = adv_loss_d(const_out(0.9), {const_out(0.1)});
  CHECK(v == doctest::Approx(expected).epsilon(1e-12));
  CHECK(v == doctest::Approx(0.2107).epsilon(1e-3));
}

TEST_CASE("adv_loss_d clamps saturated outputs instead of failing") {
  const double v = adv_loss_d(const_out(1.0), {const_out(0.0)});
  CHECK(std::isfinite(v));
  const double v2 = adv_loss_d(const_out(0.0), {const_out(1.0)});
  CHECK(std::isfinite(v2));
  CHECK(v2 > 10.0);  // confidently wrong: large but finite
}

TEST_CASE("adv_loss_g examples") {
  CHECK(adv_loss_g({const_out(1.0 - 1e-7)}) < 1e-5);
  CHECK(adv_loss_g({const_out(1.0 - 1e-7)}) >= 0.0);
  CHECK(adv_loss_g({const_out(0.5)}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(adv_loss_g({const_out(0.25)}) == doctest::Approx(-std::log(0.25)).epsilon(1e-12));
  CHECK(adv_loss_g({const_out(0.25)}) == doctest::Approx(1.3863).epsilon(1e-3));
}

TEST_CASE("reconstruction_loss: exact cycle gives exactly zero") {
  Rng rng(1);
  const Tensor x = random_small(rng);
  CHECK(reconstruction_loss(x, {x, x}) == 0.0);
}

TEST_CASE("reconstruction_loss: constant offsets sum analytically") {
  const Tensor x({3, 2, 2}, 0.1);
  const Tensor off({3, 2, 2}, 0.6);
  CHECK(reconstruction_loss(x, {off, off}) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("reconstruction_loss matches the brute-force oracle on random tensors") {
  Rng rng(2);
  for (int t = 0; t < 20; ++t) {
    const Tensor x = random_small(rng);
    const std::vector<Tensor> rec = {random_small(rng), random_small(rng)};
    CHECK(reconstruction_loss(x, rec) == doctest::Approx(naive_rec(x, rec)).epsilon(1e-12));
  }
}

TEST_CASE("reconstruction_loss swap symmetry within a term") {
  Rng rng(3);
  const Tensor x = random_small(rng);
  const Tensor r = random_small(rng);
  CHECK(reconstruction_loss(x, {r}) == doctest::Approx(reconstruction_loss(r, {x})).epsilon(1e-12));
}

TEST_CASE("reconstruction_loss rejects shape mismatches") {
  CHECK_THROWS_AS(reconstruction_loss(Tensor({3, 2, 2}), {Tensor({3, 4, 4})}), DataError);
}

TEST_CASE("identity_loss examples and oracle") {
  Rng rng(4);
  const Tensor x = random_small(rng);
  CHECK(identity_loss(x, x) == 0.0);

  Tensor shifted = x;
  for (std::int64_t i = 0; i < shifted.size(); ++i) shifted[i] += 0.25;
  CHECK(identity_loss(x, shifted) == doctest::Approx(0.25).epsilon(1e-12));

  const Tensor y = random_small(rng);
  CHECK(identity_loss(x, y) == doctest::Approx(naive_rec(x, {y})).epsilon(1e-12));
  CHECK(identity_loss(x, y) >= 0.0);
}

TEST_CASE("total_generator_loss substitution examples") {
  LossWeights w;  // 10 / 10
  CHECK(total_generator_loss(1.0, 0.2, 0.1, w) == doctest::Approx(4.0).epsilon(1e-12));
  LossWeights zero;
  zero.lambda_rec = 0.0;
  zero.lambda_idt = 0.0;
  CHECK(total_generator_loss(1.7, 5.0, 3.0, zero) == 1.7);
  CHECK(total_generator_loss(0.0, 0.0, 0.0, w) == 0.0);
}

TEST_CASE("affine-weight law holds for random inputs") {
  Rng rng(5);
  LossWeights zero;
  zero.lambda_rec = 0.0;
  zero.lambda_idt = 0.0;
  for (int t = 0; t < 50; ++t) {
    const double a = rng.uniform(0, 3), r = rng.uniform(0, 2), i = rng.uniform(0, 2);
    LossWeights w;
    w.lambda_rec = rng.uniform(0, 20);
    w.lambda_idt = rng.uniform(0, 20);
    const double lhs = total_generator_loss(a, r, i, w) - total_generator_loss(a, r, i, zero);
    CHECK(lhs == doctest::Approx(w.lambda_rec * r + w.lambda_idt * i).epsilon(1e-12));
  }
}

TEST_CASE("gradient sanity of the total via finite differences") {
  LossWeights w;
  w.lambda_rec = 7.5;
  w.lambda_idt = 2.25;
  double a = 1.1, r = 0.4, i = 0.3;
  auto f = [&] { return total_generator_loss(a, r, i, w); };
  CHECK(oracle::numeric_grad(f, &a) == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(oracle::numeric_grad(f, &r) == doctest::Approx(w.lambda_rec).epsilon(1e-7));
  CHECK(oracle::numeric_grad(f, &i) == doctest::Approx(w.lambda_idt).epsilon(1e-7));
}

TEST_CASE("graph-side adversarial losses agree with the plain versions") {
  Rng rng(6);
  auto rand_out = [&rng](int hp) {
    Tensor patch({1, hp, hp});
    for (std::int64_t i = 0; i < patch.size(); ++i) patch[i] = rng.uniform(0.05, 0.95);
    return DiscriminatorOutput{patch, rng.uniform(0.05, 0.95)};
  };
  const DiscriminatorOutput real = rand_out(3);
  const std::vector<DiscriminatorOutput> fakes = {rand_out(3), rand_out(3), rand_out(3)};

  Graph g(false);
  auto lift = [&g](const DiscriminatorOutput& o) {
    return DiscOutIds{g.input(o.patch_map), g.input(Tensor::scalar(o.global_score))};
  };
  const DiscOutIds real_ids = lift(real);
  std::vector<DiscOutIds> fake_ids;
  for (const auto& f : fakes) fake_ids.push_back(lift(f));

  CHECK(g.val(adv_loss_d_ids(g, real_ids, fake_ids))[0] ==
        doctest::Approx(adv_loss_d(real, fakes)).epsilon(1e-12));
  CHECK(g.val(adv_loss_g_ids(g, fake_ids))[0] ==
        doctest::Approx(adv_loss_g(fakes)).epsilon(1e-12));
}

TEST_CASE("LossRecord total invariant and JSON line round-trip") {
  LossRecord r;
  r.iter = 17;
  r.epoch = 3;
  r.adv_d = {0.5, 0.6, 0.7};
  r.adv_g = {1.5, 0.25, 0.125};
  r.rec = {0.1, 0.2, 0.3};
  r.idt = {0.01, 0.02, 0.03};
  LossWeights w;
  r.total_g = r.compute_total(w);
  CHECK(r.finite());
  CHECK(r.total_g == r.compute_total(w));  // exact by construction

  const std::string line = r.to_json_line();
  CHECK(line.find("\"adv_d.0\"") != std::string::npos);
  CHECK(line.find("\"rec.2\"") != std::string::npos);
  CHECK(line.find("\"total_g\"") != std::string::npos);
  const LossRecord back = LossRecord::from_json_line(line);
  CHECK(back.iter == r.iter);
  CHECK(back.epoch == r.epoch);
  CHECK(back.adv_g == r.adv_g);
  CHECK(back.rec == r.rec);
  CHECK(back.total_g == r.total_g);
}

TEST_CASE("weights must be non-negative") {
  LossWeights w;
  w.lambda_rec = -1.0;
  CHECK_THROWS_AS(w.validate(), ConfigError);
}

}  // TEST_SUITE
