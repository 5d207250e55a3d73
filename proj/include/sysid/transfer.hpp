#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sysid/bench.hpp"
#include "sysid/data.hpp"
#include "sysid/nn.hpp"

namespace sysid::transfer {

enum class StrategyKind { fine_tune, freeze };

/// How knowledge moves from the source task to the target task.
/// FineTune: short pretraining, every parameter stays trainable.
/// Freeze: longer pretraining, the named layers are frozen and the
/// remaining ones reinitialized before target training.
struct TransferStrategy {
  StrategyKind kind;
  std::size_t source_epochs;
  std::vector<std::string> frozen_layers;
  std::vector<std::string> reinit_layers;
  std::uint64_t reinit_seed = 0;
};

TransferStrategy make_fine_tune(std::size_t source_epochs = 10);
TransferStrategy make_freeze(std::size_t source_epochs = 40,
                             std::vector<std::string> frozen = {"LSTM1", "LSTM2"},
                             std::vector<std::string> reinit = {"LSTM3", "Dense"},
                             std::uint64_t reinit_seed = 7);

/// Checks the strategy against a concrete network: layer names must exist,
/// frozen and reinit sets must be disjoint, and FineTune takes no layer
/// lists.
void validate_strategy(const TransferStrategy& strategy, const nn::Network& net);

/// Trains on the source task for exactly source_epochs epochs (no early
/// stopping). With source_epochs == 0 the network is returned untouched and
/// the curve is empty, so FineTune(0) matches training from scratch bit for
/// bit.
bench::TrainResult pretrain(const nn::Network& net, const data::DatasetBundle& source,
                            const TransferStrategy& strategy, const bench::TrainConfig& cfg);

/// Applies the strategy's surgery to a pretrained network and builds the
/// mask for target training. FineTune returns the network unchanged with
/// everything trainable; Freeze reinitializes the named layers from a fresh
/// init_network(reinit_seed) and masks out the frozen ones.
std::pair<nn::Network, nn::TrainMask> prepare_for_target(const nn::Network& pretrained,
                                                         const TransferStrategy& strategy);

struct TransferReport {
  TransferStrategy strategy;
  std::uint64_t seed;
  bench::LearningCurve source_curve;
  bench::LearningCurve target_curve;
  nn::Network pretrained;  // after source training, before surgery
  nn::Network net;         // after target training
  std::optional<std::size_t> converged_at;
};

/// Full pipeline: pretrain on source, rework the network per the strategy,
/// train on target. initial_net seeds the source training.
TransferReport run_transfer(const data::DatasetBundle& source, const data::DatasetBundle& target,
                            const TransferStrategy& strategy, const bench::TrainConfig& cfg,
                            const nn::Network& initial_net);

}  // namespace sysid::transfer
