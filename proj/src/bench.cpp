#include "sysid/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <utility>

namespace sysid::bench {

using nlohmann::json;

namespace {

void validate_config(const TrainConfig& cfg) {
  if (cfg.epochs_per_group == 0) throw ParameterError("epochs_per_group must be positive");
  if (cfg.max_epochs == 0) throw ParameterError("max_epochs must be positive");
  if (cfg.bptt_window == 0) throw ParameterError("bptt_window must be positive");
  if (!(cfg.stop_tol >= 0.0)) throw ParameterError("stop_tol must be non-negative");
  if (cfg.grad_clip && !(*cfg.grad_clip > 0.0)) throw ParameterError("grad_clip must be positive");
}

void validate_dataset(const nn::Network& net, const data::Dataset& ds, const char* what) {
  if (ds.features.rank() != 3 || ds.labels.rank() != 3)
    throw DimensionError(std::string(what) + " tensors must be rank 3");
  if (ds.features.dim(2) != net.in_dim())
    throw DimensionError(std::string(what) + " feature width does not match the network");
  if (ds.labels.dim(2) != net.out_dim())
    throw DimensionError(std::string(what) + " label width does not match the network");
  if (ds.features.dim(0) != ds.labels.dim(0) || ds.features.dim(1) != ds.labels.dim(1))
    throw DimensionError(std::string(what) + " features and labels disagree on batch or time");
}

void window_copy(const Tensor& src, std::size_t t0, std::size_t wlen, Tensor& dst) {
  const std::size_t batch = src.dim(0), time = src.dim(1), ch = src.dim(2);
  for (std::size_t s = 0; s < batch; ++s)
    std::copy(src.data() + (s * time + t0) * ch, src.data() + (s * time + t0 + wlen) * ch,
              dst.data() + s * wlen * ch);
}

void clip_gradients(std::vector<double>& grads, double max_norm) {
  double sq = 0.0;
  for (double g : grads) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (double& g : grads) g *= scale;
  }
}

double metric_of(const EpochRecord& rec, StopMetric metric) {
  return metric == StopMetric::test_mse ? rec.test_mse : rec.train_mse;
}

}  // namespace

TrainResult train(const nn::Network& net, const std::vector<data::Dataset>& groups,
                  const data::Dataset& test, const nn::TrainMask& mask, const TrainConfig& cfg) {
  validate_config(cfg);
  if (groups.empty()) throw ParameterError("training needs at least one group");
  for (const auto& g : groups) validate_dataset(net, g, "train");
  validate_dataset(net, test, "test");
  if (mask.trainable.size() != net.parameter_count())
    throw DimensionError("mask does not match the parameter vector");

  TrainResult result{net, {}, std::nullopt};
  nn::Network& model = result.net;
  nn::AdamState adam = nn::AdamState::init(model, cfg.adam);

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const std::size_t g = ((epoch - 1) / cfg.epochs_per_group) % groups.size();
    const data::Dataset& ds = groups[g];
    const std::size_t batch = ds.batch(), time = ds.time();

    std::vector<nn::SequenceState> states;
    for (std::size_t t0 = 0; t0 < time; t0 += cfg.bptt_window) {
      const std::size_t wlen = std::min(cfg.bptt_window, time - t0);
      Tensor feat({batch, wlen, model.in_dim()});
      Tensor lab({batch, wlen, model.out_dim()});
      window_copy(ds.features, t0, wlen, feat);
      window_copy(ds.labels, t0, wlen, lab);

      nn::ForwardCaches caches;
      nn::forward(model, feat, &states, &caches);
      std::vector<double> grads = nn::backward(model, caches, lab);
      if (cfg.grad_clip) clip_gradients(grads, *cfg.grad_clip);
      nn::adam_step(model.params(), grads, adam, &mask);
    }

    const double train_mse = evaluate(model, ds);
    const double test_mse = evaluate(model, test);
    result.curve.records.push_back({epoch, train_mse, test_mse});

    if (cfg.early_stop && epoch >= 2) {
      const auto& recs = result.curve.records;
      const double e_n = metric_of(recs[recs.size() - 1], cfg.stop_metric);
      const double e_prev = metric_of(recs[recs.size() - 2], cfg.stop_metric);
      if (std::abs(e_n - e_prev) < cfg.stop_tol) {
        result.converged_at = epoch;
        break;
      }
    }
  }
  return result;
}

double evaluate(const nn::Network& net, const data::Dataset& ds) {
  return nn::mse(nn::forward(net, ds.features), ds.labels);
}

ScalePreset scale_preset(std::string_view name) {
  ScalePreset p;
  if (name == "desk") {
    p.name = "desk";
    p.dataset.n_groups = 3;
    p.dataset.group_size = 8;
    p.dataset.train_len = 500;
    p.dataset.test_len = 1000;
    p.lstm_sizes = {8, 16, 32};
    p.train.bptt_window = 50;
    p.train.max_epochs = 100;
    return p;
  }
  if (name == "paper") {
    p.name = "paper";
    p.dataset.n_groups = 5;
    p.dataset.group_size = 32;
    p.dataset.train_len = 5000;
    p.dataset.test_len = 10000;
    p.lstm_sizes = {16, 64, 128};
    p.train.bptt_window = 100;
    p.train.max_epochs = 200;
    return p;
  }
  throw ParameterError("unknown preset '" + std::string(name) + "' (valid: desk, paper)");
}

std::optional<std::size_t> epochs_to_threshold(const LearningCurve& curve, double tau) {
  for (const EpochRecord& rec : curve.records)
    if (rec.test_mse <= tau) return rec.epoch;
  return std::nullopt;
}

double dynamic_threshold(const LearningCurve& curve) {
  if (curve.empty()) throw ParameterError("cannot take the dynamic threshold of an empty curve");
  double lo = curve.records.front().test_mse;
  for (const EpochRecord& rec : curve.records) lo = std::min(lo, rec.test_mse);
  return 2.0 * lo;
}

MetricsReport metrics_report(const LearningCurve& curve, double constant_mse,
                             const MetricsOptions& opts) {
  if (curve.empty()) throw ParameterError("cannot score an empty curve");
  MetricsReport rep;
  rep.minimal_test_mse = curve.records.front().test_mse;
  for (const EpochRecord& rec : curve.records)
    rep.minimal_test_mse = std::min(rep.minimal_test_mse, rec.test_mse);
  rep.constant_threshold = constant_mse;
  rep.dynamic_threshold = opts.dynamic_override.value_or(2.0 * rep.minimal_test_mse);
  rep.epochs_to_constant = epochs_to_threshold(curve, rep.constant_threshold);
  rep.epochs_to_dynamic = epochs_to_threshold(curve, rep.dynamic_threshold);
  rep.converged_at = opts.converged_at;
  return rep;
}

double reduction_percent(double raw, double tr) {
  if (raw == 0.0) throw ParameterError("reduction is undefined for a zero baseline");
  return 100.0 * (raw - tr) / raw;
}

Comparison compare(const LearningCurve& baseline, const LearningCurve& transferred,
                   double constant_mse) {
  Comparison cmp;
  cmp.baseline = metrics_report(baseline, constant_mse);
  MetricsOptions opts;
  opts.dynamic_override = cmp.baseline.dynamic_threshold;
  cmp.transferred = metrics_report(transferred, constant_mse, opts);

  if (cmp.baseline.epochs_to_constant && cmp.transferred.epochs_to_constant)
    cmp.constant_reduction_percent =
        reduction_percent(static_cast<double>(*cmp.baseline.epochs_to_constant),
                          static_cast<double>(*cmp.transferred.epochs_to_constant));
  if (cmp.baseline.epochs_to_dynamic && cmp.transferred.epochs_to_dynamic)
    cmp.dynamic_reduction_percent =
        reduction_percent(static_cast<double>(*cmp.baseline.epochs_to_dynamic),
                          static_cast<double>(*cmp.transferred.epochs_to_dynamic));
  return cmp;
}

void save_curve_csv(const LearningCurve& curve, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "epoch,train_mse,test_mse\n";
  char line[96];
  for (const EpochRecord& rec : curve.records) {
    std::snprintf(line, sizeof(line), "%zu,%.17g,%.17g\n", rec.epoch, rec.train_mse, rec.test_mse);
    out << line;
  }
  if (!out) throw IoError("short write to '" + path.string() + "'");
}

LearningCurve load_curve_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != "epoch,train_mse,test_mse")
    throw IoError("bad curve header in '" + path.string() + "'");
  LearningCurve curve;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    EpochRecord rec{};
    if (std::sscanf(line.c_str(), "%zu,%lf,%lf", &rec.epoch, &rec.train_mse, &rec.test_mse) != 3)
      throw IoError("bad curve row in '" + path.string() + "'", lineno);
    curve.records.push_back(rec);
  }
  return curve;
}

json curve_to_json(const LearningCurve& curve) {
  json arr = json::array();
  for (const EpochRecord& rec : curve.records)
    arr.push_back({{"epoch", rec.epoch}, {"train_mse", rec.train_mse}, {"test_mse", rec.test_mse}});
  return arr;
}

LearningCurve curve_from_json(const json& j) {
  LearningCurve curve;
  try {
    for (const json& row : j)
      curve.records.push_back({row.at("epoch").get<std::size_t>(),
                               row.at("train_mse").get<double>(),
                               row.at("test_mse").get<double>()});
  } catch (const json::exception& e) {
    throw IoError(std::string("bad curve json: ") + e.what());
  }
  return curve;
}

namespace {

json opt_to_json(const std::optional<std::size_t>& v) {
  return v ? json(*v) : json(nullptr);
}

std::optional<std::size_t> opt_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<std::size_t>();
}

}  // namespace

json metrics_to_json(const MetricsReport& report, const LearningCurve& curve) {
  return json{{"minimal_test_mse", report.minimal_test_mse},
              {"constant_threshold", report.constant_threshold},
              {"dynamic_threshold", report.dynamic_threshold},
              {"epochs_to_constant", opt_to_json(report.epochs_to_constant)},
              {"epochs_to_dynamic", opt_to_json(report.epochs_to_dynamic)},
              {"converged_at", opt_to_json(report.converged_at)},
              {"curve", curve_to_json(curve)}};
}

void save_metrics_json(const MetricsReport& report, const LearningCurve& curve,
                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << metrics_to_json(report, curve).dump(2) << '\n';
  if (!out) throw IoError("short write to '" + path.string() + "'");
}

MetricsReport metrics_from_json(const json& j, LearningCurve* curve) {
  MetricsReport rep;
  try {
    rep.minimal_test_mse = j.at("minimal_test_mse").get<double>();
    rep.constant_threshold = j.at("constant_threshold").get<double>();
    rep.dynamic_threshold = j.at("dynamic_threshold").get<double>();
    rep.epochs_to_constant = opt_from_json(j.at("epochs_to_constant"));
    rep.epochs_to_dynamic = opt_from_json(j.at("epochs_to_dynamic"));
    rep.converged_at = opt_from_json(j.at("converged_at"));
  } catch (const json::exception& e) {
    throw IoError(std::string("bad metrics json: ") + e.what());
  }
  if (curve) *curve = curve_from_json(j.value("curve", json::array()));
  return rep;
}

}  // namespace sysid::bench
