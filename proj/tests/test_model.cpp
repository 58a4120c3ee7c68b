#include <doctest.h>

#include <cmath>
#include <cstring>

#include "mdt/errors.hpp"
#include "mdt/model.hpp"
#include "mdt/rng.hpp"
#include "mdt/trainer.hpp"
#include "support/oracles.hpp"

using namespace mdt;

namespace {

Tensor random_image(int c, int s, Rng& rng) {
  Tensor t({c, s, s});
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1.0, 1.0);
  return t;
}

bool params_equal(Generator& a, Generator& b) {
  std::vector<const Tensor*> ta, tb;
  a.visit_params([&ta](Param& p) { ta.push_back(&p.value); });
  b.visit_params([&tb](Param& p) { tb.push_back(&p.value); });
  if (ta.size() != tb.size()) return false;
  for (size_t i = 0; i < ta.size(); ++i) {
    if (ta[i]->size() != tb[i]->size()) return false;
    if (std::memcmp(ta[i]->data(), tb[i]->data(),
                    static_cast<size_t>(ta[i]->size()) * sizeof(double)) != 0)
      return false;
  }
  return true;
}

bool tensors_identical(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data(), b.data(), static_cast<size_t>(a.size()) * sizeof(double)) == 0;
}

// Conv output-size chain evaluated independently of the model code.
int patch_size_oracle(int input, int num_scales) {
  auto step = [](int s, int stride) { return (s + 2 - 4) / stride + 1; };
  int s = input;
  for (int i = 0; i < num_scales; ++i) s = step(s, 2);
  s = step(s, 1);  // stride-1 trunk stage
  s = step(s, 1);  // patch head
  return s;
}

GeneratorConfig micro_gen_cfg() {
  GeneratorConfig cfg;
  cfg.num_domains = 2;
  cfg.image_size = 8;
  cfg.base_channels = 4;
  cfg.num_downsample = 2;
  cfg.num_res_blocks = 1;
  return cfg;
}

DiscriminatorConfig micro_disc_cfg() {
  DiscriminatorConfig cfg;
  cfg.base_channels = 4;
  cfg.num_scales = 1;
  return cfg;
}

// In-memory 2-domain micro dataset for objective-level tests.
MultiDomainDataset micro_dataset(int image_size, std::uint64_t seed) {
  MultiDomainDataset ds;
  ds.image_size = image_size;
  Rng rng(seed);
  for (int d = 0; d < 2; ++d) {
    DomainImages dom;
    dom.name = "d" + std::to_string(d);
    for (int k = 0; k < 2; ++k) {
      dom.images.push_back(random_image(3, image_size, rng));
      dom.files.push_back("x" + std::to_string(k) + ".png");
    }
    ds.domains.push_back(std::move(dom));
  }
  return ds;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("generator build: one encoder, N identical decoders, 8x8 bottleneck") {
  GeneratorConfig cfg;
  cfg.num_domains = 3;
  cfg.image_size = 64;
  cfg.base_channels = 64;
  cfg.num_downsample = 3;
  Generator gen = Generator::build(cfg, 7);

  int encoder_params = 0, decoder_params[3] = {0, 0, 0};
  gen.visit_params([&](Param& p) {
    if (p.name.rfind("encoder.", 0) == 0) ++encoder_params;
    for (int d = 0; d < 3; ++d)
      if (p.name.rfind("decoder." + std::to_string(d) + ".", 0) == 0) ++decoder_params[d];
  });
  CHECK(encoder_params > 0);
  CHECK(decoder_params[0] == decoder_params[1]);
  CHECK(decoder_params[1] == decoder_params[2]);

  Rng rng(3);
  const Tensor x = random_image(3, 64, rng);
  const Encoded enc = gen.encode(x);
  CHECK(enc.latent.shape() == std::vector<int>{256, 8, 8});
  REQUIRE(enc.skips.size() == 3);
  CHECK(enc.skips[0].shape() == std::vector<int>{64, 32, 32});
  CHECK(enc.skips[1].shape() == std::vector<int>{128, 16, 16});
  CHECK(enc.skips[2].shape() == std::vector<int>{256, 8, 8});
}

TEST_CASE("same seed produces bit-identical bundles") {
  GeneratorConfig cfg;
  cfg.num_domains = 2;
  cfg.image_size = 16;
  cfg.base_channels = 8;
  cfg.num_downsample = 2;
  cfg.num_res_blocks = 2;
  Generator a = Generator::build(cfg, 42);
  Generator b = Generator::build(cfg, 42);
  CHECK(params_equal(a, b));
  Generator c = Generator::build(cfg, 43);
  CHECK_FALSE(params_equal(a, c));
}

TEST_CASE("decoders start element-wise identical") {
  GeneratorConfig cfg;
  cfg.num_domains = 3;
  cfg.image_size = 16;
  cfg.base_channels = 8;
  cfg.num_downsample = 2;
  cfg.num_res_blocks = 1;
  Generator gen = Generator::build(cfg, 5);
  std::vector<std::vector<const Tensor*>> per_decoder(3);
  gen.visit_params([&](Param& p) {
    for (int d = 0; d < 3; ++d)
      if (p.name.rfind("decoder." + std::to_string(d) + ".", 0) == 0)
        per_decoder[static_cast<size_t>(d)].push_back(&p.value);
  });
  REQUIRE(per_decoder[0].size() == per_decoder[1].size());
  REQUIRE(!per_decoder[0].empty());
  for (size_t i = 0; i < per_decoder[0].size(); ++i) {
    CHECK(tensors_identical(*per_decoder[0][i], *per_decoder[1][i]));
    CHECK(tensors_identical(*per_decoder[0][i], *per_decoder[2][i]));
  }
}

TEST_CASE("invalid configs are rejected") {
  GeneratorConfig cfg;
  cfg.num_domains = 1;
  CHECK_THROWS_AS(Generator::build(cfg, 0), ConfigError);
  cfg.num_domains = 2;
  cfg.image_size = 60;  // not divisible by 8
  CHECK_THROWS_AS(Generator::build(cfg, 0), ConfigError);
}

TEST_CASE("encode purity and degenerate input") {
  GeneratorConfig cfg = micro_gen_cfg();
  cfg.image_size = 16;
  Generator gen = Generator::build(cfg, 9);
  Rng rng(1);
  const Tensor x = random_image(3, 16, rng);
  const Encoded a = gen.encode(x);
  const Encoded b = gen.encode(x);
  CHECK(tensors_identical(a.latent, b.latent));
  const Encoded z = gen.encode(Tensor({3, 16, 16}, 0.0));
  CHECK(z.latent.all_finite());
  CHECK_THROWS_AS(gen.encode(Tensor({3, 8, 8}, 0.0)), DataError);
}

TEST_CASE("decode contracts: shape, range, init equality across decoders") {
  GeneratorConfig cfg = micro_gen_cfg();
  cfg.image_size = 16;
  cfg.num_domains = 3;
  Generator gen = Generator::build(cfg, 11);
  Rng rng(2);
  const Tensor x = random_image(3, 16, rng);
  const Encoded enc = gen.encode(x);
  const Tensor d0 = gen.decode(0, enc);
  CHECK(d0.shape() == x.shape());
  CHECK(d0.max() <= 1.0);
  CHECK(d0.min() >= -1.0);
  CHECK(tensors_identical(d0, gen.decode(1, enc)));
  CHECK(tensors_identical(d0, gen.decode(2, enc)));
  CHECK_THROWS_AS(gen.decode(3, enc), ConfigError);
}

TEST_CASE("translate composes encode and decode; translate_all is consistent") {
  GeneratorConfig cfg = micro_gen_cfg();
  cfg.image_size = 16;
  cfg.num_domains = 3;
  Generator gen = Generator::build(cfg, 13);
  Rng rng(4);
  const Tensor x = random_image(3, 16, rng);
  const auto all = gen.translate_all(x);
  REQUIRE(all.size() == 3);
  for (int j = 0; j < 3; ++j) {
    CHECK(all[static_cast<size_t>(j)].shape() == x.shape());
    CHECK(tensors_identical(all[static_cast<size_t>(j)], gen.translate(x, j)));
    CHECK(tensors_identical(all[static_cast<size_t>(j)], gen.decode(j, gen.encode(x))));
  }
}

TEST_CASE("init symmetry: every translation identical before any update") {
  GeneratorConfig cfg = micro_gen_cfg();
  cfg.image_size = 16;
  cfg.num_domains = 3;
  Generator gen = Generator::build(cfg, 17);
  Rng rng(6);
  for (int t = 0; t < 3; ++t) {
    const auto all = gen.translate_all(random_image(3, 16, rng));
    CHECK(tensors_identical(all[0], all[1]));
    CHECK(tensors_identical(all[0], all[2]));
  }
}

TEST_CASE("discriminator patch map sizes follow the conv-shape oracle") {
  DiscriminatorConfig cfg;
  cfg.base_channels = 8;
  CHECK(Discriminator::patch_map_size(cfg, 256) == 30);
  CHECK(Discriminator::patch_map_size(cfg, 64) == 6);
  CHECK(patch_size_oracle(256, 3) == 30);
  CHECK(patch_size_oracle(64, 3) == 6);
  for (int input : {32, 64, 128})
    CHECK(Discriminator::patch_map_size(cfg, input) == patch_size_oracle(input, cfg.num_scales));

  Discriminator d = Discriminator::build(cfg, 1);
  Rng rng(8);
  const DiscriminatorOutput out = d.discriminate(random_image(3, 64, rng));
  CHECK(out.patch_map.shape() == std::vector<int>{1, 6, 6});
}

TEST_CASE("discriminator outputs live in (0,1) and are pure") {
  DiscriminatorConfig cfg = micro_disc_cfg();
  Discriminator d = Discriminator::build(cfg, 21);
  Rng rng(9);
  const Tensor x = random_image(3, 8, rng);
  const DiscriminatorOutput a = d.discriminate(x);
  const DiscriminatorOutput b = d.discriminate(x);
  CHECK(tensors_identical(a.patch_map, b.patch_map));
  CHECK(a.global_score == b.global_score);
  CHECK(a.global_score > 0.0);
  CHECK(a.global_score < 1.0);
  for (std::int64_t i = 0; i < a.patch_map.size(); ++i) {
    CHECK(a.patch_map[i] > 0.0);
    CHECK(a.patch_map[i] < 1.0);
  }
}

TEST_CASE("two discriminators with one seed are identical") {
  DiscriminatorConfig cfg = micro_disc_cfg();
  Discriminator a = Discriminator::build(cfg, 33);
  Discriminator b = Discriminator::build(cfg, 33);
  std::vector<const Tensor*> ta, tb;
  a.visit_params([&ta](Param& p) { ta.push_back(&p.value); });
  b.visit_params([&tb](Param& p) { tb.push_back(&p.value); });
  REQUIRE(ta.size() == tb.size());
  for (size_t i = 0; i < ta.size(); ++i) CHECK(tensors_identical(*ta[i], *tb[i]));
}

TEST_CASE("a single-domain loss reaches the shared encoder") {
  MultiDomainDataset ds = micro_dataset(8, 77);
  TrainConfig tcfg;
  tcfg.epochs = 1;
  tcfg.seed = 5;
  TrainState st = init_training(ds, micro_gen_cfg(), micro_disc_cfg(), tcfg);
  for (Param* p : st.gen.params()) p->zero_grad();

  // Only domain 0's adversarial term; identity/reconstruction off.
  Graph g;
  const auto x0 = g.input(ds.domains[0].images[0]);
  const auto enc = st.gen.encode_ids(g, x0);
  const auto fake = st.gen.decode_ids(g, 0, enc);
  const auto out = st.discs[0].apply_ids(g, fake, true);
  g.backward(adv_loss_g_ids(g, {out}));

  double encoder_grad = 0.0;
  st.gen.visit_params([&](Param& p) {
    if (p.name.rfind("encoder.", 0) != 0) return;
    for (std::int64_t i = 0; i < p.grad.size(); ++i) encoder_grad += std::abs(p.grad[i]);
  });
  CHECK(encoder_grad > 0.0);
}

TEST_CASE("micro-config gradients match finite differences for every parameter") {
  MultiDomainDataset ds = micro_dataset(8, 99);
  TrainConfig tcfg;
  tcfg.epochs = 1;
  tcfg.seed = 123;
  TrainState st = init_training(ds, micro_gen_cfg(), micro_disc_cfg(), tcfg);
  const UnpairedBag bag{{1, 0}};

  SUBCASE("generator objective, all generator parameters") {
    auto eval = [&] {
      Graph g(false);
      return g.val(build_generator_objective(g, st, ds, bag).root)[0];
    };
    const auto params = st.gen.params();
    for (Param* p : params) p->zero_grad();
    {
      Graph g;
      g.backward(build_generator_objective(g, st, ds, bag).root);
    }
    std::int64_t checked = 0, skipped = 0;
    for (Param* p : params) {
      for (std::int64_t i = 0; i < p->value.size(); ++i) {
        const double ad = p->grad[i];
        const double fd = oracle::numeric_grad(eval, &p->value[i], 1e-6);
        if (std::abs(ad) < 1e-7 && std::abs(fd) < 1e-7) {
          ++skipped;  // both effectively zero: relative error is meaningless
          continue;
        }
        INFO("param ", p->name, " index ", i, " ad=", ad, " fd=", fd);
        CHECK(oracle::fd_rel_err(eval, &p->value[i], ad) < 1e-3);
        ++checked;
      }
    }
    CHECK(checked > 1000);
    CHECK(skipped < checked);
  }

  SUBCASE("discriminator objective, all discriminator parameters") {
    auto eval = [&] {
      Graph g(false);
      return g.val(build_discriminator_objective(g, st, ds, bag, 0))[0];
    };
    const auto params = st.discs[0].params();
    for (Param* p : params) p->zero_grad();
    {
      Graph g;
      g.backward(build_discriminator_objective(g, st, ds, bag, 0));
    }
    for (Param* p : params) {
      for (std::int64_t i = 0; i < p->value.size(); ++i) {
        const double ad = p->grad[i];
        const double fd = oracle::numeric_grad(eval, &p->value[i], 1e-6);
        if (std::abs(ad) < 1e-7 && std::abs(fd) < 1e-7) continue;
        INFO("param ", p->name, " index ", i, " ad=", ad, " fd=", fd);
        CHECK(oracle::fd_rel_err(eval, &p->value[i], ad) < 1e-3);
      }
    }
  }
}

}  // TEST_SUITE
