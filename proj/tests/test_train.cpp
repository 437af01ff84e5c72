#include <doctest.h>

#include <cmath>
#include <limits>

#include "support.hpp"
#include "tomnet/binio.hpp"
#include "tomnet/error.hpp"
#include "tomnet/train.hpp"

using namespace tomnet;

namespace {

const Dataset& tiny_data() {
  static const Dataset d = build_dataset(testing::tiny_spec(3, 6, 30, 5));
  return d;
}

SpsConfig quick(Variant v, int epochs) {
  SpsConfig c;
  c.variant = v;
  c.widths = SpsWidths::reduced();
  c.max_epochs = epochs;
  c.early_stop_patience = 1000;
  c.batch_size = 16;
  c.init_seed = 4;
  return c;
}

}  // namespace

TEST_CASE("learning-rate schedule") {
  CHECK(lr_at_epoch(0.001, 0) == 0.001);
  CHECK(lr_at_epoch(0.001, 29) == 0.001);
  CHECK(lr_at_epoch(0.001, 30) == 0.0005);
  CHECK(lr_at_epoch(0.001, 59) == 0.0005);
  CHECK(lr_at_epoch(0.001, 60) == 0.00025);
  CHECK(lr_at_epoch(0.001, 80) == 0.000125);
  CHECK(lr_at_epoch(0.001, 160) == doctest::Approx(0.0000625).epsilon(1e-15));
  CHECK(lr_at_epoch(0.001, 199) == lr_at_epoch(0.001, 160));
  CHECK(kLearningRates.size() == 6);
  for (double lr : {0.00015, 0.0005, 0.00075, 0.001})
    CHECK(std::find(kLearningRates.begin(), kLearningRates.end(), lr) !=
          kLearningRates.end());
}

TEST_CASE("single Adam step from a fresh state") {
  std::vector<double> w{0.0}, g{1.0}, m{0.0}, v{0.0};
  adam_step(w, g, m, v, 1, 0.001);
  CHECK(w[0] == doctest::Approx(-0.001 / (1.0 + 1e-8)).epsilon(1e-14));
  CHECK(w[0] == doctest::Approx(-0.000999999990).epsilon(1e-9));
  CHECK(m[0] == doctest::Approx(0.1));
  CHECK(v[0] == doctest::Approx(0.001));

  std::vector<double> w2{0.0}, m2{0.0}, v2{0.0};
  adam_step(w2, g, m2, v2, 1, 0.001);
  CHECK(w2 == w);
}

TEST_CASE("zero gradient leaves weights and decays moments") {
  std::vector<double> w{0.5, -1.0}, g{0.0, 0.0}, m{0.2, -0.4}, v{0.0, 0.0};
  adam_step(w, g, m, v, 3, 0.001);
  CHECK(m[0] == doctest::Approx(0.18));
  CHECK(m[1] == doctest::Approx(-0.36));
  // Stale first moment still moves weights; with m = 0 nothing changes.
  std::vector<double> w0{0.5}, g0{0.0}, m0{0.0}, v0{0.25};
  adam_step(w0, g0, m0, v0, 3, 0.001);
  CHECK(w0[0] == 0.5);
  CHECK(v0[0] == doctest::Approx(0.25 * 0.999));
}

TEST_CASE("non-finite gradients are reported with the parameter") {
  SpsModel m = SpsModel::create(Variant::NoBel, SpsWidths::reduced(), 1);
  AdamState s = AdamState::for_model(m);
  m.zero_grad();
  m.param("head.action.fc1.w").grad[3] = std::numeric_limits<double>::quiet_NaN();
  try {
    adam_step(m, s, 0.001);
    FAIL("expected a training error");
  } catch (const TrainingError& e) {
    CHECK(std::string(e.what()).find("head.action.fc1.w") != std::string::npos);
  }
  CHECK(s.step == 0);
}

TEST_CASE("config validation names keys") {
  SpsConfig c;
  CHECK_NOTHROW(c.validate());
  c.base_lr = 0.01;
  try {
    c.validate();
    FAIL("expected config error");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "train.lrs");
  }
  c = {};
  c.batch_size = 1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  for (double lr : kLearningRates) {
    c = {};
    c.base_lr = lr;
    CHECK_NOTHROW(c.validate());
  }
}

TEST_CASE("full-batch loss decreases") {
  auto subset = testing::memorization_subset();
  Batch batch = make_batch(subset);
  for (Variant v : {Variant::Bel, Variant::NoBel}) {
    SpsModel m = SpsModel::create(v, SpsWidths{}, 2);
    AdamState s = AdamState::for_model(m);
    double prev = std::numeric_limits<double>::infinity();
    int down = 0;
    for (int step = 0; step <= 50; ++step) {
      m.zero_grad();
      double loss = forward_backward(m, batch, {}, true).total;
      adam_step(m, s, 1e-3);
      down += loss < prev;
      prev = loss;
    }
    INFO(variant_name(v));
    CHECK(down - 1 >= 45);  // the first step has no predecessor
  }
}

TEST_CASE("training curves follow the schedule and stay finite") {
  SpsConfig c = quick(Variant::Bel, 3);
  c.milestones = {1, 2};
  int calls = 0;
  TrainResult r = train(tiny_data(), c, [&](const EpochRecord&) { ++calls; });
  CHECK(calls == 3);
  REQUIRE(r.curves.epochs.size() == 3);
  for (const EpochRecord& e : r.curves.epochs) {
    CHECK(e.lr == lr_at_epoch(c.base_lr, e.epoch, c.milestones, c.lr_gamma));
    CHECK(std::isfinite(e.train.total));
    CHECK(std::isfinite(e.validation.total));
    CHECK(e.validation.belief >= 0.0);
  }
  CHECK(r.curves.epochs[1].lr == 0.0005);
  CHECK(r.curves.best_epoch >= 0);
}

TEST_CASE("early stopping restores the best epoch") {
  SpsConfig c = quick(Variant::NoBel, 60);
  c.early_stop_patience = 2;
  c.base_lr = 0.001;
  TrainResult stopped = train(tiny_data(), c);
  REQUIRE(stopped.curves.early_stopped);
  const int best = stopped.curves.best_epoch;
  CHECK(static_cast<int>(stopped.curves.epochs.size()) == best + 1 + 2);
  double lowest = std::numeric_limits<double>::infinity();
  for (const EpochRecord& e : stopped.curves.epochs)
    lowest = std::min(lowest, e.validation.total);
  CHECK(stopped.curves.best_validation == lowest);
  CHECK(stopped.curves.epochs[best].validation.total == lowest);

  // A run cut at the best epoch ends with exactly those weights.
  SpsConfig cut = c;
  cut.max_epochs = best + 1;
  cut.early_stop_patience = 1000;
  TrainResult reference = train(tiny_data(), cut);
  CHECK(reference.model == stopped.model);
}

TEST_CASE("training is deterministic") {
  SpsConfig c = quick(Variant::Bel, 2);
  TrainResult a = train(tiny_data(), c);
  TrainResult b = train(tiny_data(), c);
  CHECK(a.model == b.model);
  CHECK(serialize_checkpoint(a.model, a.adam) ==
        serialize_checkpoint(b.model, b.adam));
  c.init_seed = 5;
  CHECK(!(train(tiny_data(), c).model == a.model));
}

TEST_CASE("checkpoint round trip and corruption") {
  SpsConfig c = quick(Variant::Bel, 1);
  TrainResult r = train(tiny_data(), c);
  auto bytes = serialize_checkpoint(r.model, r.adam);
  CHECK(bytes[0] == 'S');
  CHECK(bytes[3] == '1');
  Checkpoint back = deserialize_checkpoint(bytes);
  CHECK(back.model == r.model);
  CHECK(back.adam == r.adam);
  CHECK(back.model.variant() == Variant::Bel);
  CHECK(serialize_checkpoint(back.model, back.adam) == bytes);

  auto dir = testing::scratch_dir("ckpt");
  save_checkpoint(dir / "a.sps", r.model, r.adam);
  CHECK(read_file(dir / "a.sps") == bytes);
  CHECK(load_checkpoint(dir / "a.sps").model == r.model);

  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x10;
  CHECK_THROWS_AS(deserialize_checkpoint(flipped), FormatError);
  std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + 100);
  CHECK_THROWS_AS(deserialize_checkpoint(cut), FormatError);
  CHECK_THROWS_AS(deserialize_checkpoint({}), FormatError);
  auto extra = bytes;
  extra.push_back(1);
  CHECK_THROWS_AS(deserialize_checkpoint(extra), FormatError);
}
