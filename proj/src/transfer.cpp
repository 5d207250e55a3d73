#include "sysid/transfer.hpp"

#include <algorithm>
#include <utility>

namespace sysid::transfer {

TransferStrategy make_fine_tune(std::size_t source_epochs) {
  return TransferStrategy{StrategyKind::fine_tune, source_epochs, {}, {}, 0};
}

TransferStrategy make_freeze(std::size_t source_epochs, std::vector<std::string> frozen,
                             std::vector<std::string> reinit, std::uint64_t reinit_seed) {
  return TransferStrategy{StrategyKind::freeze, source_epochs, std::move(frozen),
                          std::move(reinit), reinit_seed};
}

void validate_strategy(const TransferStrategy& strategy, const nn::Network& net) {
  if (strategy.kind == StrategyKind::fine_tune) {
    if (!strategy.frozen_layers.empty() || !strategy.reinit_layers.empty())
      throw ParameterError("fine-tune transfer takes no layer lists");
    return;
  }
  const auto names = net.layer_names();
  auto check = [&](const std::vector<std::string>& list, const char* what) {
    for (const auto& name : list)
      if (std::find(names.begin(), names.end(), name) == names.end())
        throw ParameterError(std::string(what) + " names unknown layer '" + name + "'");
  };
  check(strategy.frozen_layers, "frozen set");
  check(strategy.reinit_layers, "reinit set");
  for (const auto& name : strategy.frozen_layers)
    if (std::find(strategy.reinit_layers.begin(), strategy.reinit_layers.end(), name) !=
        strategy.reinit_layers.end())
      throw ParameterError("layer '" + name + "' is both frozen and reinitialized");
}

bench::TrainResult pretrain(const nn::Network& net, const data::DatasetBundle& source,
                            const TransferStrategy& strategy, const bench::TrainConfig& cfg) {
  validate_strategy(strategy, net);
  if (strategy.source_epochs == 0) return bench::TrainResult{net, {}, std::nullopt};
  bench::TrainConfig pre_cfg = cfg;
  pre_cfg.early_stop = false;
  pre_cfg.max_epochs = strategy.source_epochs;
  return bench::train(net, source.train_groups, source.test, nn::TrainMask::all(net), pre_cfg);
}

std::pair<nn::Network, nn::TrainMask> prepare_for_target(const nn::Network& pretrained,
                                                         const TransferStrategy& strategy) {
  validate_strategy(strategy, pretrained);
  if (strategy.kind == StrategyKind::fine_tune)
    return {pretrained, nn::TrainMask::all(pretrained)};

  nn::Network net = pretrained;
  if (!strategy.reinit_layers.empty()) {
    const nn::Network fresh = nn::init_network(net.lstm_sizes(), strategy.reinit_seed,
                                               net.in_dim(), net.out_dim());
    const auto names = net.layer_names();
    for (const auto& name : strategy.reinit_layers) {
      const auto it = std::find(names.begin(), names.end(), name);
      const auto [begin, end] = net.layer_range(static_cast<std::size_t>(it - names.begin()));
      std::copy(fresh.params().begin() + static_cast<std::ptrdiff_t>(begin),
                fresh.params().begin() + static_cast<std::ptrdiff_t>(end),
                net.params().begin() + static_cast<std::ptrdiff_t>(begin));
    }
  }
  nn::TrainMask mask = nn::TrainMask::from_frozen(net, strategy.frozen_layers);
  return {std::move(net), std::move(mask)};
}

TransferReport run_transfer(const data::DatasetBundle& source, const data::DatasetBundle& target,
                            const TransferStrategy& strategy, const bench::TrainConfig& cfg,
                            const nn::Network& initial_net) {
  bench::TrainResult pre = pretrain(initial_net, source, strategy, cfg);
  auto [net, mask] = prepare_for_target(pre.net, strategy);
  bench::TrainResult fin = bench::train(net, target.train_groups, target.test, mask, cfg);
  return TransferReport{strategy,
                        cfg.seed,
                        std::move(pre.curve),
                        std::move(fin.curve),
                        std::move(pre.net),
                        std::move(fin.net),
                        fin.converged_at};
}

}  // namespace sysid::transfer
