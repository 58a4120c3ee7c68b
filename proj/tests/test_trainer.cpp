#include <doctest.h>

#include <cmath>
#include <fstream>

#include "mdt/checkpoint.hpp"
#include "mdt/errors.hpp"
#include "mdt/optimizer.hpp"
#include "mdt/schedule.hpp"
#include "mdt/trainer.hpp"
#include "support/fixtures.hpp"

using namespace mdt;
using fixtures::identical;

namespace {

std::vector<Tensor> snapshot(const std::vector<Param*>& params) {
  std::vector<Tensor> out;
  for (const Param* p : params) out.push_back(p->value);
  return out;
}

bool all_identical(const std::vector<Param*>& params, const std::vector<Tensor>& snap) {
  for (size_t i = 0; i < params.size(); ++i)
    if (!identical(params[i]->value, snap[i])) return false;
  return true;
}

TrainState micro_state(const MultiDomainDataset& ds, std::uint64_t seed, int epochs = 4,
                       int iters = 2) {
  TrainConfig tcfg;
  tcfg.epochs = epochs;
  tcfg.iterations_per_epoch = iters;
  tcfg.seed = seed;
  return init_training(ds, fixtures::micro_gen(ds.num_domains(), ds.image_size),
                       fixtures::micro_disc(), tcfg);
}

std::vector<std::string> run_and_log(TrainState& st, const MultiDomainDataset& ds) {
  std::vector<std::string> lines;
  TrainSinks sinks;
  sinks.on_iteration = [&lines](const LossRecord& r) { lines.push_back(r.to_json_line()); };
  train(st, ds, sinks);
  return lines;
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("learning-rate schedule values and invariants") {
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.lr0 = 0.0002;
  CHECK(lr_at_epoch(0, cfg) == doctest::Approx(0.0002).epsilon(1e-15));
  CHECK(lr_at_epoch(99, cfg) == doctest::Approx(0.0002).epsilon(1e-15));
  CHECK(lr_at_epoch(150, cfg) == doctest::Approx(0.0001).epsilon(1e-12));
  CHECK(lr_at_epoch(200, cfg) == 0.0);
  CHECK_THROWS_AS(lr_at_epoch(-1, cfg), ConfigError);
  CHECK_THROWS_AS(lr_at_epoch(201, cfg), ConfigError);

  for (int epochs : {2, 10, 200}) {
    TrainConfig c;
    c.epochs = epochs;
    c.lr0 = 0.0002;
    double prev = c.lr0, area = 0.0;
    for (int e = 0; e <= epochs; ++e) {
      const double lr = lr_at_epoch(e, c);
      CHECK(lr <= prev + 1e-18);  // monotone non-increasing
      prev = lr;
      area += lr;
    }
    const double half = epochs / 2.0;
    CHECK(area == doctest::Approx(c.lr0 * (half + (half + 1.0) / 2.0)).epsilon(1e-9));
  }
}

TEST_CASE("adaptive-moment first step matches the closed form") {
  // One parameter, gradient set by hand: after one step the update is
  // lr * mhat / (sqrt(vhat) + eps) with mhat = g and vhat = g^2.
  Param p("theta", Tensor::scalar(1.5));
  const double g = 0.37;
  p.grad[0] = g;
  Adam opt(0.5, 0.999, 1e-8);
  const double lr = 0.01;
  opt.step({&p}, lr);
  const double expected = 1.5 - lr * g / (std::sqrt(g * g) + 1e-8);
  CHECK(p.value[0] == doctest::Approx(expected).epsilon(1e-12));
  CHECK(opt.steps() == 1);

  // Second step with the same gradient: bias corrections change.
  p.grad[0] = g;
  opt.step({&p}, lr);
  const double m2 = 0.5 * (0.5 * g) + 0.5 * g;
  const double v2 = 0.999 * (0.001 * g * g) + 0.001 * g * g;
  const double mhat = m2 / (1.0 - 0.25);
  const double vhat = v2 / (1.0 - 0.999 * 0.999);
  CHECK(p.value[0] ==
        doctest::Approx(expected - lr * mhat / (std::sqrt(vhat) + 1e-8)).epsilon(1e-10));
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  auto ds = fixtures::tiny_dataset(2, 2, 8, 31);
  TrainState st = micro_state(ds, 7);
  const UnpairedBag bag = sample_bag(ds, st.rng);

  const auto gparams = st.gen.params();
  const auto dparams = st.discs[0].params();
  const auto gsnap = snapshot(gparams);
  const auto dsnap = snapshot(dparams);

  const auto adv_d = discriminator_step(st, ds, bag, 0.0);
  CHECK(all_identical(dparams, dsnap));
  CHECK(all_identical(gparams, gsnap));
  for (double v : adv_d) {
    CHECK(std::isfinite(v));
    CHECK(v > 0.0);
  }

  const LossRecord rec = generator_step(st, ds, bag, 0.0);
  CHECK(all_identical(gparams, gsnap));
  CHECK(rec.finite());
  CHECK(rec.total_g > 0.0);
}

TEST_CASE("update isolation between the two phases") {
  auto ds = fixtures::tiny_dataset(2, 2, 8, 32);
  TrainState st = micro_state(ds, 8);
  const UnpairedBag bag = sample_bag(ds, st.rng);

  const auto gsnap = snapshot(st.gen.params());
  discriminator_step(st, ds, bag, 1e-3);
  CHECK(all_identical(st.gen.params(), gsnap));  // D phase never touches G

  std::vector<Tensor> dsnap;
  for (auto& d : st.discs)
    for (Param* p : d.params()) dsnap.push_back(p->value);
  generator_step(st, ds, bag, 1e-3);
  size_t k = 0;
  bool d_unchanged = true;
  for (auto& d : st.discs)
    for (Param* p : d.params()) d_unchanged &= identical(p->value, dsnap[k++]);
  CHECK(d_unchanged);
}

TEST_CASE("record layout for a 3-domain bag: 3 rec sums of 2 terms, 3 idt") {
  auto ds = fixtures::tiny_dataset(3, 2, 8, 33);
  TrainState st = micro_state(ds, 9);
  const UnpairedBag bag = sample_bag(ds, st.rng);

  Graph g;
  const GeneratorObjective obj = build_generator_objective(g, st, ds, bag);
  CHECK(obj.adv_g.size() == 3);
  CHECK(obj.idt.size() == 3);
  REQUIRE(obj.rec_terms.size() == 3);
  for (const auto& terms : obj.rec_terms) CHECK(terms.size() == 2);

  const LossRecord rec = generator_step(st, ds, bag, 1e-4);
  CHECK(rec.adv_g.size() == 3);
  CHECK(rec.rec.size() == 3);
  CHECK(rec.idt.size() == 3);
  CHECK(rec.total_g == rec.compute_total(st.train_cfg.weights));
}

TEST_CASE("encoder moves even with both constraint weights at zero") {
  auto ds = fixtures::tiny_dataset(2, 2, 8, 34);
  TrainConfig tcfg;
  tcfg.epochs = 1;
  tcfg.seed = 10;
  tcfg.weights.lambda_rec = 0.0;
  tcfg.weights.lambda_idt = 0.0;
  TrainState st = init_training(ds, fixtures::micro_gen(2, 8), fixtures::micro_disc(), tcfg);
  const UnpairedBag bag = sample_bag(ds, st.rng);

  std::vector<Tensor> enc_before;
  st.gen.visit_params([&](Param& p) {
    if (p.name.rfind("encoder.", 0) == 0) enc_before.push_back(p.value);
  });
  generator_step(st, ds, bag, 1e-3);
  size_t k = 0;
  bool changed = false;
  st.gen.visit_params([&](Param& p) {
    if (p.name.rfind("encoder.", 0) == 0) changed |= !identical(p.value, enc_before[k++]);
  });
  CHECK(changed);
}

TEST_CASE("decoders diverge after one generator step") {
  auto ds = fixtures::tiny_dataset(2, 2, 8, 35);
  TrainState st = micro_state(ds, 11);
  const UnpairedBag bag = sample_bag(ds, st.rng);
  discriminator_step(st, ds, bag, 2e-4);  // give the two discriminators distinct signals
  generator_step(st, ds, bag, 2e-4);

  std::vector<const Tensor*> dec0, dec1;
  st.gen.visit_params([&](Param& p) {
    if (p.name.rfind("decoder.0.", 0) == 0) dec0.push_back(&p.value);
    if (p.name.rfind("decoder.1.", 0) == 0) dec1.push_back(&p.value);
  });
  REQUIRE(dec0.size() == dec1.size());
  bool any_diff = false;
  for (size_t i = 0; i < dec0.size(); ++i) any_diff |= !identical(*dec0[i], *dec1[i]);
  CHECK(any_diff);
}

TEST_CASE("train emits exactly epochs * iterations records") {
  auto ds = fixtures::tiny_dataset(2, 3, 8, 36);
  TrainState st = micro_state(ds, 12, /*epochs=*/1, /*iters=*/2);
  const auto lines = run_and_log(st, ds);
  CHECK(lines.size() == 2);
  CHECK(st.next_epoch == 1);
  CHECK(st.next_iter == 2);
}

TEST_CASE("iterations_per_epoch auto resolves to the largest domain") {
  auto ds = fixtures::tiny_dataset(2, 3, 8, 37);
  ds.domains[1].images.push_back(fixtures::tiny_dataset(2, 1, 8, 38).domains[0].images[0]);
  ds.domains[1].files.push_back("extra.png");
  TrainConfig cfg;
  CHECK(resolve_iterations_per_epoch(cfg, ds) == 4);
  cfg.iterations_per_epoch = 7;
  CHECK(resolve_iterations_per_epoch(cfg, ds) == 7);
}

TEST_CASE("fixed seed reproduces the loss stream exactly") {
  auto ds = fixtures::tiny_dataset(2, 3, 8, 39);
  TrainState a = micro_state(ds, 99, 2, 3);
  TrainState b = micro_state(ds, 99, 2, 3);
  CHECK(run_and_log(a, ds) == run_and_log(b, ds));

  TrainState c = micro_state(ds, 100, 2, 3);
  CHECK(run_and_log(a, ds) != run_and_log(c, ds));  // different seed, different stream
}

TEST_CASE("checkpoint round-trip is lossless and resume matches uninterrupted training") {
  fixtures::TempDir tmp("ckpt");
  auto ds = fixtures::tiny_dataset(2, 3, 8, 40);

  // Uninterrupted reference: 4 epochs.
  TrainState ref = micro_state(ds, 55, 4, 2);
  const auto ref_lines = run_and_log(ref, ds);
  REQUIRE(ref_lines.size() == 8);

  // Interrupted run: 2 epochs, checkpoint, reload, resume.
  TrainState first = micro_state(ds, 55, 4, 2);
  first.train_cfg.epochs = 2;
  std::vector<std::string> lines;
  TrainSinks sinks;
  sinks.on_iteration = [&lines](const LossRecord& r) { lines.push_back(r.to_json_line()); };
  train(first, ds, sinks);
  first.train_cfg.epochs = 4;  // restore the full horizon before saving
  const std::string path = (tmp.path() / "mid.mdtckpt").string();
  save_checkpoint(first, path, "testhash");

  TrainState resumed = load_checkpoint(path);
  CHECK(resumed.next_epoch == 2);
  CHECK(resumed.next_iter == 4);

  // Bit-identical parameters after reload.
  const auto pa = first.gen.params();
  const auto pb = resumed.gen.params();
  REQUIRE(pa.size() == pb.size());
  for (size_t i = 0; i < pa.size(); ++i) {
    CHECK(identical(pa[i]->value, pb[i]->value));
    CHECK(identical(pa[i]->m, pb[i]->m));
    CHECK(identical(pa[i]->v, pb[i]->v));
  }
  CHECK(resumed.rng.state() == first.rng.state());
  CHECK(resumed.opt_g.steps() == first.opt_g.steps());

  train(resumed, ds, sinks);
  CHECK(lines == ref_lines);
}

TEST_CASE("corrupted checkpoints are rejected whole") {
  fixtures::TempDir tmp("corrupt");
  auto ds = fixtures::tiny_dataset(2, 2, 8, 41);
  TrainState st = micro_state(ds, 66);
  const std::string path = (tmp.path() / "c.mdtckpt").string();
  save_checkpoint(st, path, "h");

  // Flip one payload byte: checksum must fail.
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(-64, std::ios::end);
    char b;
    f.read(&b, 1);
    f.seekp(-64, std::ios::end);
    b = static_cast<char>(b ^ 0x40);
    f.write(&b, 1);
  }
  CHECK_THROWS_AS(load_checkpoint(path), IoError);

  const std::string junk = (tmp.path() / "junk.mdtckpt").string();
  std::ofstream(junk) << "not a checkpoint at all";
  CHECK_THROWS_AS(load_checkpoint(junk), IoError);
}

TEST_CASE("training with a mismatched dataset is a configuration error") {
  auto ds2 = fixtures::tiny_dataset(2, 2, 8, 42);
  auto ds3 = fixtures::tiny_dataset(3, 2, 8, 43);
  TrainState st = micro_state(ds2, 77);
  TrainSinks sinks;
  CHECK_THROWS_AS(train(st, ds3, sinks), ConfigError);
}

TEST_CASE("non-finite loss halts with a final checkpoint") {
  fixtures::TempDir tmp("halt");
  auto ds = fixtures::tiny_dataset(2, 2, 8, 44);
  TrainState st = micro_state(ds, 88, 1, 2);
  // Poison one generator weight; every loss that touches it goes non-finite.
  st.gen.params().front()->value[0] = std::numeric_limits<double>::quiet_NaN();

  bool saved = false;
  const std::string halt_path = (tmp.path() / "halt.mdtckpt").string();
  TrainSinks sinks;
  try {
    train(st, ds, sinks, [&](TrainState& s) {
      save_checkpoint(s, halt_path, "h");
      saved = true;
      return halt_path;
    });
    FAIL("expected TrainingHalted");
  } catch (const TrainingHalted& e) {
    CHECK(e.checkpoint_path == halt_path);
  }
  CHECK(saved);
}

}  // TEST_SUITE
