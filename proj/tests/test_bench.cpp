#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "sysid/bench.hpp"

using namespace sysid;
using namespace sysid::bench;
namespace fs = std::filesystem;

namespace {

fs::path tmp_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "sysid_bench_tests";
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

LearningCurve curve_of(std::initializer_list<double> test_mses) {
  LearningCurve c;
  std::size_t epoch = 1;
  for (double v : test_mses) c.records.push_back({epoch++, v * 1.1, v});
  return c;
}

/// Curve whose test MSE first dips under 1e-2 at the given 1-based epoch.
LearningCurve curve_reaching(std::size_t epoch, std::size_t total) {
  LearningCurve c;
  for (std::size_t e = 1; e <= total; ++e) {
    const double v = e < epoch ? 0.5 / static_cast<double>(e) : 0.009 / static_cast<double>(e);
    c.records.push_back({e, v, v});
  }
  return c;
}

data::Dataset constant_dataset(std::size_t batch, std::size_t time, double label,
                               std::uint64_t seed) {
  data::Dataset ds{Tensor({batch, time, 2}), Tensor({batch, time, 1}), {}};
  SplitMix64 rng(seed);
  for (std::size_t s = 0; s < batch; ++s)
    for (std::size_t t = 0; t < time; ++t) {
      ds.features.at(s, t, 0) = 2.0 * rng.next_double() - 1.0;
      ds.features.at(s, t, 1) = static_cast<double>(t) / static_cast<double>(time);
      ds.labels.at(s, t, 0) = label;
    }
  return ds;
}

}  // namespace

TEST_CASE("epochs_to_threshold finds the first crossing") {
  const LearningCurve curve = curve_of({0.5, 0.02, 0.009, 0.003});
  CHECK(epochs_to_threshold(curve, 1e-2) == 3);
  CHECK(epochs_to_threshold(curve, 0.5) == 1);
  CHECK(epochs_to_threshold(curve, 1e-4) == std::nullopt);
}

TEST_CASE("dynamic threshold is exactly twice the minimum") {
  const LearningCurve curve = curve_of({0.5, 0.0030905, 0.004, 0.0212});
  CHECK(dynamic_threshold(curve) == 2.0 * 0.0030905);
  CHECK_THROWS_AS(dynamic_threshold(LearningCurve{}), ParameterError);
}

TEST_CASE("metrics report fields and ordering invariant") {
  const LearningCurve curve = curve_of({0.5, 0.02, 0.009, 0.003, 0.0031, 0.00305});
  MetricsOptions opts;
  opts.converged_at = 6;
  const MetricsReport rep = metrics_report(curve, 1e-2, opts);
  CHECK(rep.minimal_test_mse == 0.003);
  CHECK(rep.dynamic_threshold == 0.006);
  CHECK(rep.constant_threshold == 1e-2);
  CHECK(rep.epochs_to_constant == 3);
  CHECK(rep.epochs_to_dynamic == 4);
  CHECK(rep.converged_at == 6);
  CHECK(*rep.epochs_to_constant <= *rep.converged_at);
  CHECK(*rep.epochs_to_dynamic <= *rep.converged_at);

  MetricsOptions override_opts;
  override_opts.dynamic_override = 0.01;
  const MetricsReport shared = metrics_report(curve, 1e-2, override_opts);
  CHECK(shared.dynamic_threshold == 0.01);
  CHECK(shared.epochs_to_dynamic == 3);
}

TEST_CASE("published epoch pairs give the published reductions") {
  // (baseline, transferred, percent as printed)
  const struct {
    std::size_t base, tr;
    double percent;
    double tol;
  } cases[] = {
      {19, 9, 52.6, 0.05}, {29, 25, 13.8, 0.05}, {19, 11, 42.1, 0.05}, {29, 26, 10.3, 0.05},
      {16, 11, 31.3, 0.05}, {29, 19, 34.5, 0.05},
  };
  for (const auto& c : cases) {
    const double p = reduction_percent(static_cast<double>(c.base), static_cast<double>(c.tr));
    // Within half a unit of the last printed digit (16->11 is exactly 31.25).
    CHECK_MESSAGE(std::abs(p - c.percent) <= c.tol + 1e-12, c.base, "->", c.tr, " gave ", p);
  }
  // 16 -> 9 is exact in binary floating point.
  CHECK(reduction_percent(16.0, 9.0) == 43.75);

  CHECK(reduction_percent(10.0, 15.0) == -50.0);
  CHECK_THROWS_AS(reduction_percent(0.0, 1.0), ParameterError);
}

TEST_CASE("compare scores both curves against the baseline's dynamic threshold") {
  const LearningCurve base = curve_reaching(19, 25);
  const LearningCurve tr = curve_reaching(9, 25);
  const Comparison cmp = compare(base, tr, 1e-2);
  CHECK(cmp.baseline.epochs_to_constant == 19);
  CHECK(cmp.transferred.epochs_to_constant == 9);
  CHECK(cmp.transferred.dynamic_threshold == cmp.baseline.dynamic_threshold);
  REQUIRE(cmp.constant_reduction_percent.has_value());
  CHECK(std::abs(*cmp.constant_reduction_percent - 52.6) < 0.05);

  // A transferred run that never reaches the threshold yields no reduction.
  LearningCurve never;
  for (std::size_t e = 1; e <= 5; ++e) never.records.push_back({e, 0.5, 0.5});
  const Comparison cmp2 = compare(base, never, 1e-2);
  CHECK(!cmp2.transferred.epochs_to_constant.has_value());
  CHECK(!cmp2.constant_reduction_percent.has_value());
}

TEST_CASE("train visits groups round robin") {
  // Distinct constant labels per group; a tiny learning rate keeps the
  // network essentially fixed, so the per-epoch train MSE names the group.
  std::vector<data::Dataset> groups = {constant_dataset(2, 20, 0.0, 1),
                                       constant_dataset(2, 20, 5.0, 2),
                                       constant_dataset(2, 20, 10.0, 3)};
  const data::Dataset test = constant_dataset(2, 20, 0.0, 4);

  TrainConfig cfg;
  cfg.epochs_per_group = 2;
  cfg.max_epochs = 12;
  cfg.stop_tol = 0.0;  // never stop early
  cfg.bptt_window = 20;
  cfg.adam.alpha = 1e-9;

  const nn::Network net = nn::init_network({3}, 11);
  const TrainResult res = train(net, groups, test, nn::TrainMask::all(net), cfg);
  REQUIRE(res.curve.n_epochs() == 12);
  CHECK(!res.converged_at.has_value());

  auto level = [&](std::size_t epoch) { return res.curve.records[epoch - 1].train_mse; };
  // Group 0 (labels 0) ~ 0, group 1 (labels 5) ~ 25, group 2 (labels 10) ~ 100.
  for (std::size_t e : {1, 2, 7, 8}) CHECK(level(e) < 5.0);
  for (std::size_t e : {3, 4, 9, 10}) {
    CHECK(level(e) > 5.0);
    CHECK(level(e) < 60.0);
  }
  for (std::size_t e : {5, 6, 11, 12}) CHECK(level(e) > 60.0);

  // Epochs are 1-based and consecutive.
  for (std::size_t i = 0; i < res.curve.records.size(); ++i)
    CHECK(res.curve.records[i].epoch == i + 1);
}

TEST_CASE("stop_tol zero disables early stopping; max_epochs caps the run") {
  std::vector<data::Dataset> groups = {constant_dataset(1, 10, 0.1, 5)};
  const data::Dataset test = constant_dataset(1, 10, 0.1, 6);
  TrainConfig cfg;
  cfg.max_epochs = 5;
  cfg.stop_tol = 0.0;
  cfg.bptt_window = 10;
  const nn::Network net = nn::init_network({2}, 3);
  const TrainResult res = train(net, groups, test, nn::TrainMask::all(net), cfg);
  CHECK(res.curve.n_epochs() == 5);
  CHECK(!res.converged_at.has_value());
}

TEST_CASE("stopping soundness on a real run") {
  std::vector<data::Dataset> groups = {constant_dataset(2, 30, 0.2, 7)};
  const data::Dataset test = constant_dataset(2, 30, 0.2, 8);
  TrainConfig cfg;
  cfg.max_epochs = 60;
  cfg.stop_tol = 1e-4;
  cfg.bptt_window = 10;
  const nn::Network net = nn::init_network({3}, 4);
  const TrainResult res = train(net, groups, test, nn::TrainMask::all(net), cfg);

  const auto& recs = res.curve.records;
  REQUIRE(!recs.empty());
  if (res.converged_at) {
    CHECK(*res.converged_at == recs.back().epoch);
    REQUIRE(recs.size() >= 2);
    const double d = std::abs(recs[recs.size() - 1].test_mse - recs[recs.size() - 2].test_mse);
    CHECK(d < cfg.stop_tol);
  } else {
    CHECK(recs.size() == cfg.max_epochs);
  }
}

TEST_CASE("train validates its inputs") {
  const nn::Network net = nn::init_network({2}, 3);
  const data::Dataset ds = constant_dataset(1, 10, 0.0, 1);
  TrainConfig cfg;
  CHECK_THROWS_AS(train(net, {}, ds, nn::TrainMask::all(net), cfg), ParameterError);

  TrainConfig bad = cfg;
  bad.bptt_window = 0;
  CHECK_THROWS_AS(train(net, {ds}, ds, nn::TrainMask::all(net), bad), ParameterError);
  bad = cfg;
  bad.max_epochs = 0;
  CHECK_THROWS_AS(train(net, {ds}, ds, nn::TrainMask::all(net), bad), ParameterError);

  nn::TrainMask short_mask;
  short_mask.trainable.assign(3, 1);
  CHECK_THROWS_AS(train(net, {ds}, ds, short_mask, cfg), DimensionError);
}

TEST_CASE("evaluate equals the forward-pass MSE by definition") {
  const nn::Network net = nn::init_network({3}, 17);
  const data::Dataset ds = constant_dataset(2, 12, 0.3, 9);
  CHECK(evaluate(net, ds) == nn::mse(nn::forward(net, ds.features), ds.labels));
}

TEST_CASE("curve csv round trips bitwise") {
  LearningCurve curve;
  SplitMix64 rng(55);
  for (std::size_t e = 1; e <= 40; ++e)
    curve.records.push_back({e, rng.next_double() * 1e-3, rng.next_double() * 1e-3});

  const fs::path p = tmp_dir() / "curve.csv";
  save_curve_csv(curve, p);
  const LearningCurve back = load_curve_csv(p);
  REQUIRE(back.n_epochs() == curve.n_epochs());
  for (std::size_t i = 0; i < curve.records.size(); ++i) {
    CHECK(back.records[i].epoch == curve.records[i].epoch);
    CHECK(back.records[i].train_mse == curve.records[i].train_mse);
    CHECK(back.records[i].test_mse == curve.records[i].test_mse);
  }

  std::ifstream in(p);
  std::string header;
  std::getline(in, header);
  CHECK(header == "epoch,train_mse,test_mse");

  {
    std::ofstream out(tmp_dir() / "bad_header.csv");
    out << "a,b,c\n1,0.5,0.5\n";
  }
  CHECK_THROWS_AS(load_curve_csv(tmp_dir() / "bad_header.csv"), IoError);
  {
    std::ofstream out(tmp_dir() / "bad_row.csv");
    out << "epoch,train_mse,test_mse\n1,0.5\n";
  }
  CHECK_THROWS_AS(load_curve_csv(tmp_dir() / "bad_row.csv"), IoError);
}

TEST_CASE("metrics json round trips including absent counts") {
  const LearningCurve curve = curve_of({0.5, 0.2});
  const MetricsReport rep = metrics_report(curve, 1e-2);
  CHECK(!rep.epochs_to_constant.has_value());

  const fs::path p = tmp_dir() / "metrics.json";
  save_metrics_json(rep, curve, p);

  std::ifstream in(p);
  const nlohmann::json j = nlohmann::json::parse(in);
  CHECK(j.at("epochs_to_constant").is_null());
  CHECK(j.at("minimal_test_mse").get<double>() == 0.2);

  LearningCurve back_curve;
  const MetricsReport back = metrics_from_json(j, &back_curve);
  CHECK(back.minimal_test_mse == rep.minimal_test_mse);
  CHECK(back.dynamic_threshold == rep.dynamic_threshold);
  CHECK(back.epochs_to_constant == rep.epochs_to_constant);
  REQUIRE(back_curve.n_epochs() == 2);
  CHECK(back_curve.records[1].test_mse == 0.2);
}

TEST_CASE("scale presets pin the experiment shapes") {
  const ScalePreset desk = scale_preset("desk");
  CHECK(desk.dataset.n_groups == 3);
  CHECK(desk.dataset.group_size == 8);
  CHECK(desk.dataset.train_len == 500);
  CHECK(desk.dataset.test_len == 1000);
  CHECK(desk.lstm_sizes == std::vector<std::size_t>{8, 16, 32});
  CHECK(desk.train.max_epochs == 100);

  const ScalePreset paper = scale_preset("paper");
  CHECK(paper.dataset.n_groups == 5);
  CHECK(paper.dataset.group_size == 32);
  CHECK(paper.dataset.train_len == 5000);
  CHECK(paper.dataset.test_len == 10000);
  CHECK(paper.lstm_sizes == std::vector<std::size_t>{16, 64, 128});
  CHECK(paper.train.bptt_window == 100);

  // Training defaults shared by both scales.
  CHECK(desk.train.epochs_per_group == 10);
  CHECK(desk.train.stop_tol == 5e-5);
  CHECK(desk.train.adam.alpha == 0.01);
  CHECK(desk.train.adam.beta1 == 0.9);
  CHECK(desk.train.adam.beta2 == 0.999);
  CHECK(desk.train.adam.eps == 1e-8);

  CHECK_THROWS_AS(scale_preset("pocket"), ParameterError);
}

TEST_CASE("gradient clipping changes the step when it binds") {
  std::vector<data::Dataset> groups = {constant_dataset(1, 10, 3.0, 13)};
  const data::Dataset test = constant_dataset(1, 10, 3.0, 14);
  const nn::Network net = nn::init_network({2}, 8);

  TrainConfig plain;
  plain.max_epochs = 1;
  plain.bptt_window = 10;
  TrainConfig clipped = plain;
  clipped.grad_clip = 1e-6;

  const TrainResult a = train(net, groups, test, nn::TrainMask::all(net), plain);
  const TrainResult b = train(net, groups, test, nn::TrainMask::all(net), clipped);
  CHECK(std::memcmp(a.net.params().data(), b.net.params().data(),
                    net.parameter_count() * sizeof(double)) != 0);

  TrainConfig bad = plain;
  bad.grad_clip = -1.0;
  CHECK_THROWS_AS(train(net, groups, test, nn::TrainMask::all(net), bad), ParameterError);
}
