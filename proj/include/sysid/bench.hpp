#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sysid/data.hpp"
#include "sysid/nn.hpp"

#include "json.hpp"

namespace sysid::bench {

enum class StopMetric { train_mse, test_mse };

struct TrainConfig {
  std::size_t epochs_per_group = 10;
  double stop_tol = 5e-5;
  std::size_t max_epochs = 200;
  std::size_t bptt_window = 100;
  double constant_mse = 1e-2;
  std::uint64_t seed = 1;
  StopMetric stop_metric = StopMetric::test_mse;
  std::optional<double> grad_clip;
  nn::AdamConfig adam;
  bool early_stop = true;
};

struct EpochRecord {
  std::size_t epoch;  // 1-based
  double train_mse;
  double test_mse;
};

struct LearningCurve {
  std::vector<EpochRecord> records;

  bool empty() const { return records.empty(); }
  std::size_t n_epochs() const { return records.size(); }
};

struct TrainResult {
  nn::Network net;
  LearningCurve curve;
  /// Epoch at which |e_n - e_{n-1}| < stop_tol first held, if it did.
  std::optional<std::size_t> converged_at;
};

/// Trains on the groups round robin: epoch n (1-based) uses group
/// ((n-1)/epochs_per_group) mod n_groups. Each epoch sweeps the group's
/// sequences window by window (bptt_window steps), carrying hidden state
/// across windows and resetting it between epochs. Optimizer state is
/// created fresh inside.
TrainResult train(const nn::Network& net, const std::vector<data::Dataset>& groups,
                  const data::Dataset& test, const nn::TrainMask& mask, const TrainConfig& cfg);

/// Test-set MSE of the network, exactly mse(forward(net, features), labels).
double evaluate(const nn::Network& net, const data::Dataset& ds);

/// First 1-based epoch whose test MSE is <= tau, if any.
std::optional<std::size_t> epochs_to_threshold(const LearningCurve& curve, double tau);

/// Twice the smallest test MSE seen along the curve.
double dynamic_threshold(const LearningCurve& curve);

struct MetricsReport {
  double minimal_test_mse;
  double constant_threshold;
  double dynamic_threshold;
  std::optional<std::size_t> epochs_to_constant;
  std::optional<std::size_t> epochs_to_dynamic;
  std::optional<std::size_t> converged_at;
};

struct MetricsOptions {
  std::optional<std::size_t> converged_at;
  /// Overrides the curve's own dynamic threshold; a transferred run is
  /// scored against the threshold of its baseline.
  std::optional<double> dynamic_override;
};

MetricsReport metrics_report(const LearningCurve& curve, double constant_mse,
                             const MetricsOptions& opts = {});

/// Percentage improvement of tr over raw: 100 * (raw - tr) / raw.
double reduction_percent(double raw, double tr);

struct Comparison {
  MetricsReport baseline;
  MetricsReport transferred;
  std::optional<double> constant_reduction_percent;
  std::optional<double> dynamic_reduction_percent;
};

/// Scores both curves with a shared dynamic threshold taken from the
/// baseline. Reductions are absent when either side never reached the
/// threshold.
Comparison compare(const LearningCurve& baseline, const LearningCurve& transferred,
                   double constant_mse);

/// CSV with header epoch,train_mse,test_mse, full round-trip precision.
void save_curve_csv(const LearningCurve& curve, const std::filesystem::path& path);
LearningCurve load_curve_csv(const std::filesystem::path& path);

/// Experiment scale bundling dataset sizes, architecture, and training
/// knobs. "desk" keeps the full pipeline in CI time; "paper" restores the
/// benchmark sizes.
struct ScalePreset {
  std::string name;
  data::DatasetSpec dataset;
  std::vector<std::size_t> lstm_sizes;
  TrainConfig train;
};

ScalePreset scale_preset(std::string_view name);

nlohmann::json curve_to_json(const LearningCurve& curve);
LearningCurve curve_from_json(const nlohmann::json& j);

/// Report serialization; the curve rides along so reports can be re-scored
/// later without the training run.
nlohmann::json metrics_to_json(const MetricsReport& report, const LearningCurve& curve);
void save_metrics_json(const MetricsReport& report, const LearningCurve& curve,
                       const std::filesystem::path& path);
MetricsReport metrics_from_json(const nlohmann::json& j, LearningCurve* curve = nullptr);

}  // namespace sysid::bench
