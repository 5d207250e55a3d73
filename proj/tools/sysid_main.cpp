// Command-line front end for the system-identification pipeline:
//   gen       draw excitation signals and simulate a benchmark system
//   train     scratch-train an LSTM stack on a generated dataset
//   transfer  pretrain on a source system, then train on a target
//   report    compare baseline and transferred metrics files
//   predict   dump truth/prediction overlays for plotting
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"
#include "json.hpp"

#include "sysid/bench.hpp"
#include "sysid/data.hpp"
#include "sysid/dynsys.hpp"
#include "sysid/nn.hpp"
#include "sysid/transfer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sysid;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void apply_thread_cap() {
  const char* env = std::getenv("SYSID_THREADS");
  if (!env || !*env) return;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || n < 1)
    throw UsageError("SYSID_THREADS must be a positive integer, got '" + std::string(env) + "'");
#ifdef _OPENMP
  if (n < omp_get_max_threads()) omp_set_num_threads(static_cast<int>(n));
#endif
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("short write to '" + path.string() + "'");
}

void echo_config(const fs::path& dir, const json& cfg) {
  write_text(dir / "config.json", cfg.dump(2) + "\n");
}

void make_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

json train_config_to_json(const bench::TrainConfig& cfg) {
  json j{{"epochs_per_group", cfg.epochs_per_group},
         {"stop_tol", cfg.stop_tol},
         {"max_epochs", cfg.max_epochs},
         {"bptt_window", cfg.bptt_window},
         {"constant_mse", cfg.constant_mse},
         {"seed", cfg.seed},
         {"stop_metric", cfg.stop_metric == bench::StopMetric::test_mse ? "test" : "train"},
         {"adam", {{"alpha", cfg.adam.alpha},
                   {"beta1", cfg.adam.beta1},
                   {"beta2", cfg.adam.beta2},
                   {"eps", cfg.adam.eps}}}};
  j["grad_clip"] = cfg.grad_clip ? json(*cfg.grad_clip) : json(nullptr);
  return j;
}

std::string fmt_opt(const std::optional<std::size_t>& v) {
  return v ? std::to_string(*v) : "never";
}

// --- gen -------------------------------------------------------------------

struct GenOpts {
  std::string system;
  std::string preset = "desk";
  std::string out;
  std::uint64_t seed = 2021;
  std::size_t groups = 0, group_size = 0, train_len = 0, test_len = 0;
};

void run_gen(const CLI::App& cmd, const GenOpts& o) {
  const std::string canon = dynsys::canonical_system_name(o.system);
  data::DatasetSpec spec = bench::scale_preset(o.preset).dataset;
  spec.seed = o.seed;
  if (cmd.count("--groups")) spec.n_groups = o.groups;
  if (cmd.count("--group-size")) spec.group_size = o.group_size;
  if (cmd.count("--train-len")) spec.train_len = o.train_len;
  if (cmd.count("--test-len")) spec.test_len = o.test_len;

  const data::DatasetBundle bundle = data::build_dataset(dynsys::preset(canon), spec, canon);
  make_out_dir(o.out);
  data::save_bundle(bundle, o.out);

  echo_config(o.out, json{{"command", "gen"},
                          {"system", canon},
                          {"preset", o.preset},
                          {"dataset",
                           {{"n_groups", spec.n_groups},
                            {"group_size", spec.group_size},
                            {"train_len", spec.train_len},
                            {"test_len", spec.test_len},
                            {"seed", spec.seed}}}});

  std::printf("%s: %zu train groups of %zux%zu, test %zux%zu -> %s\n", canon.c_str(),
              spec.n_groups, spec.group_size, spec.train_len, spec.group_size, spec.test_len,
              o.out.c_str());
}

// --- shared train/transfer plumbing ----------------------------------------

struct NetOpts {
  std::string preset = "desk";
  std::vector<std::size_t> lstm_sizes;
  std::size_t max_epochs = 0, bptt_window = 0, epochs_per_group = 0;
  double stop_tol = -1.0, alpha = -1.0, grad_clip = 0.0;
  std::string stop_metric = "test";
};

void add_net_options(CLI::App* cmd, NetOpts& o) {
  cmd->add_option("--preset", o.preset, "experiment scale preset")
      ->check(CLI::IsMember({"desk", "paper"}))
      ->capture_default_str();
  cmd->add_option("--lstm-sizes", o.lstm_sizes, "comma-separated LSTM layer widths")
      ->delimiter(',');
  cmd->add_option("--max-epochs", o.max_epochs, "training epoch cap");
  cmd->add_option("--bptt-window", o.bptt_window, "truncated-BPTT window length");
  cmd->add_option("--epochs-per-group", o.epochs_per_group,
                  "consecutive epochs before rotating groups");
  cmd->add_option("--stop-tol", o.stop_tol, "early-stopping tolerance on successive MSE");
  cmd->add_option("--stop-metric", o.stop_metric, "MSE the stopping rule watches")
      ->check(CLI::IsMember({"train", "test"}))
      ->capture_default_str();
  cmd->add_option("--alpha", o.alpha, "Adam learning rate");
  cmd->add_option("--grad-clip", o.grad_clip, "global gradient-norm clip");
}

/// Resolves preset defaults plus explicit overrides into a train config and
/// layer sizes.
std::pair<bench::TrainConfig, std::vector<std::size_t>> resolve_net(const CLI::App& cmd,
                                                                    const NetOpts& o,
                                                                    std::uint64_t seed) {
  const bench::ScalePreset preset = bench::scale_preset(o.preset);
  bench::TrainConfig cfg = preset.train;
  cfg.seed = seed;
  if (cmd.count("--max-epochs")) cfg.max_epochs = o.max_epochs;
  if (cmd.count("--bptt-window")) cfg.bptt_window = o.bptt_window;
  if (cmd.count("--epochs-per-group")) cfg.epochs_per_group = o.epochs_per_group;
  if (cmd.count("--stop-tol")) cfg.stop_tol = o.stop_tol;
  if (cmd.count("--alpha")) cfg.adam.alpha = o.alpha;
  if (cmd.count("--grad-clip")) cfg.grad_clip = o.grad_clip;
  cfg.stop_metric =
      o.stop_metric == "train" ? bench::StopMetric::train_mse : bench::StopMetric::test_mse;
  std::vector<std::size_t> sizes = cmd.count("--lstm-sizes") ? o.lstm_sizes : preset.lstm_sizes;
  return {cfg, sizes};
}

void print_run_summary(const char* tag, const bench::LearningCurve& curve,
                       const std::optional<std::size_t>& converged, double constant_mse) {
  const bench::MetricsOptions opts{converged, std::nullopt};
  const bench::MetricsReport rep = bench::metrics_report(curve, constant_mse, opts);
  std::printf("%s: %zu epochs, min test MSE %.6g, converged %s\n", tag, curve.n_epochs(),
              rep.minimal_test_mse, fmt_opt(rep.converged_at).c_str());
  std::printf("%s: epochs to %.3g: %s, epochs to dynamic %.6g: %s\n", tag, rep.constant_threshold,
              fmt_opt(rep.epochs_to_constant).c_str(), rep.dynamic_threshold,
              fmt_opt(rep.epochs_to_dynamic).c_str());
}

// --- train ------------------------------------------------------------------

struct TrainOpts {
  std::string data, out;
  std::uint64_t seed = 1;
  NetOpts net;
};

void run_train(const CLI::App& cmd, const TrainOpts& o) {
  const auto [cfg, sizes] = resolve_net(cmd, o.net, o.seed);
  const data::DatasetBundle bundle = data::load_bundle(o.data);

  nn::Network net = nn::init_network(sizes, o.seed);
  const bench::TrainResult res =
      bench::train(net, bundle.train_groups, bundle.test, nn::TrainMask::all(net), cfg);

  make_out_dir(o.out);
  bench::save_curve_csv(res.curve, fs::path(o.out) / "curve.csv");
  const bench::MetricsOptions mopts{res.converged_at, std::nullopt};
  bench::save_metrics_json(bench::metrics_report(res.curve, cfg.constant_mse, mopts), res.curve,
                           fs::path(o.out) / "metrics.json");

  const json prov{{"command", "train"},
                  {"dataset", bundle.test.meta.system},
                  {"seed", o.seed},
                  {"lstm_sizes", sizes},
                  {"preset", o.net.preset}};
  nn::save_checkpoint(res.net, fs::path(o.out) / "model.sidm", prov);

  echo_config(o.out, json{{"command", "train"},
                          {"data", o.data},
                          {"seed", o.seed},
                          {"lstm_sizes", sizes},
                          {"preset", o.net.preset},
                          {"train", train_config_to_json(cfg)}});

  print_run_summary("scratch", res.curve, res.converged_at, cfg.constant_mse);
  std::printf("wrote curve.csv, metrics.json, model.sidm -> %s\n", o.out.c_str());
}

// --- transfer ----------------------------------------------------------------

struct TransferOpts {
  std::string source_data, target_data, out;
  std::string strategy;
  std::uint64_t seed = 1;
  std::size_t source_epochs = 0;
  std::vector<std::string> frozen, reinit;
  std::uint64_t reinit_seed = 7;
  bool with_baseline = false;
  std::uint64_t baseline_seed = 0;
  NetOpts net;
};

transfer::TransferStrategy build_strategy(const CLI::App& cmd, const TransferOpts& o) {
  if (o.strategy == "finetune") {
    if (cmd.count("--frozen") || cmd.count("--reinit") || cmd.count("--reinit-seed"))
      throw UsageError("--frozen/--reinit apply to --strategy freeze only");
    transfer::TransferStrategy s = transfer::make_fine_tune();
    if (cmd.count("--source-epochs")) s.source_epochs = o.source_epochs;
    return s;
  }
  transfer::TransferStrategy s = transfer::make_freeze();
  if (cmd.count("--source-epochs")) s.source_epochs = o.source_epochs;
  if (cmd.count("--frozen")) s.frozen_layers = o.frozen;
  if (cmd.count("--reinit")) s.reinit_layers = o.reinit;
  s.reinit_seed = o.reinit_seed;
  return s;
}

void run_transfer_cmd(const CLI::App& cmd, const TransferOpts& o) {
  const auto [cfg, sizes] = resolve_net(cmd, o.net, o.seed);
  const transfer::TransferStrategy strategy = build_strategy(cmd, o);

  const data::DatasetBundle source = data::load_bundle(o.source_data);
  const data::DatasetBundle target = data::load_bundle(o.target_data);
  if (source.test.features.dim(2) != target.test.features.dim(2) ||
      source.test.labels.dim(2) != target.test.labels.dim(2))
    throw DimensionError("source and target datasets disagree on channel counts");

  const nn::Network net0 = nn::init_network(sizes, o.seed);
  const transfer::TransferReport rep =
      transfer::run_transfer(source, target, strategy, cfg, net0);

  make_out_dir(o.out);
  bench::save_curve_csv(rep.source_curve, fs::path(o.out) / "source_curve.csv");
  bench::save_curve_csv(rep.target_curve, fs::path(o.out) / "target_curve.csv");

  const char* kind = strategy.kind == transfer::StrategyKind::fine_tune ? "finetune" : "freeze";
  const json strategy_json{{"kind", kind},
                           {"source_epochs", strategy.source_epochs},
                           {"frozen_layers", strategy.frozen_layers},
                           {"reinit_layers", strategy.reinit_layers},
                           {"reinit_seed", strategy.reinit_seed}};

  json prov{{"command", "transfer"}, {"strategy", strategy_json},
            {"source", source.test.meta.system}, {"target", target.test.meta.system},
            {"seed", o.seed}, {"lstm_sizes", sizes}};
  prov["phase"] = "pretrained";
  nn::save_checkpoint(rep.pretrained, fs::path(o.out) / "pretrained.sidm", prov);
  prov["phase"] = "final";
  nn::save_checkpoint(rep.net, fs::path(o.out) / "model.sidm", prov);

  const bench::MetricsOptions mopts{rep.converged_at, std::nullopt};
  const bench::MetricsReport target_metrics =
      bench::metrics_report(rep.target_curve, cfg.constant_mse, mopts);
  bench::save_metrics_json(target_metrics, rep.target_curve, fs::path(o.out) / "metrics.json");

  json report{{"strategy", strategy_json},
              {"seed", o.seed},
              {"source", source.test.meta.system},
              {"target", target.test.meta.system},
              {"source_epochs_run", rep.source_curve.n_epochs()},
              {"target_metrics", bench::metrics_to_json(target_metrics, rep.target_curve)}};

  print_run_summary(kind, rep.target_curve, rep.converged_at, cfg.constant_mse);

  if (o.with_baseline) {
    const std::uint64_t bseed = cmd.count("--baseline-seed") ? o.baseline_seed : o.seed;
    bench::TrainConfig bcfg = cfg;
    bcfg.seed = bseed;
    const nn::Network bnet = nn::init_network(sizes, bseed);
    const bench::TrainResult base =
        bench::train(bnet, target.train_groups, target.test, nn::TrainMask::all(bnet), bcfg);
    bench::save_curve_csv(base.curve, fs::path(o.out) / "baseline_curve.csv");

    const bench::Comparison cmpres = bench::compare(base.curve, rep.target_curve, cfg.constant_mse);
    const bench::MetricsOptions bopts{base.converged_at, std::nullopt};
    bench::save_metrics_json(bench::metrics_report(base.curve, cfg.constant_mse, bopts),
                             base.curve, fs::path(o.out) / "baseline_metrics.json");
    report["baseline_seed"] = bseed;
    report["comparison"] = json{
        {"baseline", bench::metrics_to_json(cmpres.baseline, base.curve)},
        {"transferred", bench::metrics_to_json(cmpres.transferred, rep.target_curve)},
        {"constant_reduction_percent", cmpres.constant_reduction_percent
                                           ? json(*cmpres.constant_reduction_percent)
                                           : json(nullptr)},
        {"dynamic_reduction_percent", cmpres.dynamic_reduction_percent
                                          ? json(*cmpres.dynamic_reduction_percent)
                                          : json(nullptr)}};

    print_run_summary("baseline", base.curve, base.converged_at, cfg.constant_mse);
    if (cmpres.constant_reduction_percent)
      std::printf("constant-metric reduction: %.1f%%\n", *cmpres.constant_reduction_percent);
    if (cmpres.dynamic_reduction_percent)
      std::printf("dynamic-metric reduction: %.1f%%\n", *cmpres.dynamic_reduction_percent);
  }

  write_text(fs::path(o.out) / "report.json", report.dump(2) + "\n");
  echo_config(o.out, json{{"command", "transfer"},
                          {"source_data", o.source_data},
                          {"target_data", o.target_data},
                          {"strategy", strategy_json},
                          {"seed", o.seed},
                          {"with_baseline", o.with_baseline},
                          {"lstm_sizes", sizes},
                          {"preset", o.net.preset},
                          {"train", train_config_to_json(cfg)}});
  std::printf("wrote curves, report.json, model.sidm -> %s\n", o.out.c_str());
}

// --- report -------------------------------------------------------------------

struct ReportOpts {
  std::string baseline, transferred, out;
};

json load_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("bad json in '" + path.string() + "': " + e.what());
  }
}

void run_report(const CLI::App&, const ReportOpts& o) {
  bench::LearningCurve base_curve, tr_curve;
  const bench::MetricsReport base_in =
      bench::metrics_from_json(load_json_file(o.baseline), &base_curve);
  const bench::MetricsReport tr_in =
      bench::metrics_from_json(load_json_file(o.transferred), &tr_curve);
  if (base_in.constant_threshold != tr_in.constant_threshold)
    throw ParameterError("metrics files disagree on the constant MSE threshold (" +
                         std::to_string(base_in.constant_threshold) + " vs " +
                         std::to_string(tr_in.constant_threshold) + ")");
  if (base_curve.empty() || tr_curve.empty())
    throw ParameterError("metrics files carry no curves to compare");

  const bench::Comparison cmp =
      bench::compare(base_curve, tr_curve, base_in.constant_threshold);

  auto row = [](const char* name, const std::optional<std::size_t>& b,
                const std::optional<std::size_t>& t, const std::optional<double>& red) {
    std::printf("%-28s %9s %12s", name, fmt_opt(b).c_str(), fmt_opt(t).c_str());
    if (red)
      std::printf(" %9.1f%%\n", *red);
    else
      std::printf(" %10s\n", "n/a");
  };
  std::printf("%-28s %9s %12s %10s\n", "metric", "baseline", "transferred", "reduction");
  char name[64];
  std::snprintf(name, sizeof(name), "epochs to constant %.3g", cmp.baseline.constant_threshold);
  row(name, cmp.baseline.epochs_to_constant, cmp.transferred.epochs_to_constant,
      cmp.constant_reduction_percent);
  std::snprintf(name, sizeof(name), "epochs to dynamic %.6g", cmp.baseline.dynamic_threshold);
  row(name, cmp.baseline.epochs_to_dynamic, cmp.transferred.epochs_to_dynamic,
      cmp.dynamic_reduction_percent);

  if (!o.out.empty()) {
    const json j{{"baseline", bench::metrics_to_json(cmp.baseline, base_curve)},
                 {"transferred", bench::metrics_to_json(cmp.transferred, tr_curve)},
                 {"constant_reduction_percent", cmp.constant_reduction_percent
                                                    ? json(*cmp.constant_reduction_percent)
                                                    : json(nullptr)},
                 {"dynamic_reduction_percent", cmp.dynamic_reduction_percent
                                                   ? json(*cmp.dynamic_reduction_percent)
                                                   : json(nullptr)}};
    write_text(o.out, j.dump(2) + "\n");
    std::printf("wrote %s\n", o.out.c_str());
  }
}

// --- predict --------------------------------------------------------------------

struct PredictOpts {
  std::string model, data, out = "overlay.csv";
  std::size_t seq_index = 0;
  std::string split = "test";
  bool self_test = false;
};

void run_predict(const CLI::App&, const PredictOpts& o) {
  data::Dataset ds = [&] {
    if (o.split == "test") return data::load_dataset(fs::path(o.data) / "test.sidd");
    if (o.split.rfind("train:", 0) == 0) {
      const std::string idx = o.split.substr(6);
      return data::load_dataset(fs::path(o.data) / ("train_g" + idx + ".sidd"));
    }
    throw UsageError("--split must be 'test' or 'train:<group>'");
  }();
  if (o.seq_index >= ds.batch())
    throw ParameterError("sequence index " + std::to_string(o.seq_index) +
                         " out of range for batch of " + std::to_string(ds.batch()));

  // Slice the one sequence out of the batch.
  const std::size_t time = ds.time();
  Tensor feat({1, time, ds.features.dim(2)});
  Tensor truth({1, time, ds.labels.dim(2)});
  for (std::size_t t = 0; t < time; ++t) {
    for (std::size_t ch = 0; ch < ds.features.dim(2); ++ch)
      feat.at(0, t, ch) = ds.features.at(o.seq_index, t, ch);
    truth.at(0, t, 0) = ds.labels.at(o.seq_index, t, 0);
  }

  Tensor pred({1, time, 1});
  if (o.self_test) {
    pred = truth;
  } else {
    const nn::Network net = nn::load_checkpoint(o.model);
    pred = nn::forward(net, feat);
  }

  std::string buf = "t,y_true,y_pred\n";
  char line[96];
  for (std::size_t t = 0; t < time; ++t) {
    std::snprintf(line, sizeof(line), "%zu,%.17g,%.17g\n", t, truth.at(0, t, 0),
                  pred.at(0, t, 0));
    buf += line;
  }
  write_text(o.out, buf);
  std::printf("sequence %zu MSE: %.17g\n", o.seq_index, nn::mse(pred, truth));
  std::printf("wrote %s\n", o.out.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LSTM system-identification benchmark pipeline"};
  app.require_subcommand(1);

  GenOpts gen;
  CLI::App* gen_cmd = app.add_subcommand("gen", "generate a train/test dataset bundle");
  gen_cmd->add_option("--system", gen.system, "benchmark system")
      ->required()
      ->check(CLI::IsMember({"lti3", "lti2", "wh", "cheby2", "lti3_source", "lti2_target",
                             "wh_benchmark", "cheby2_source"}));
  gen_cmd->add_option("--seed", gen.seed, "dataset seed")->capture_default_str();
  gen_cmd->add_option("--preset", gen.preset, "experiment scale preset")
      ->check(CLI::IsMember({"desk", "paper"}))
      ->capture_default_str();
  gen_cmd->add_option("--groups", gen.groups, "training group count");
  gen_cmd->add_option("--group-size", gen.group_size, "sequences per group");
  gen_cmd->add_option("--train-len", gen.train_len, "training sequence length");
  gen_cmd->add_option("--test-len", gen.test_len, "test sequence length");
  gen_cmd->add_option("--out", gen.out, "output directory")->required();

  TrainOpts train_o;
  CLI::App* train_cmd = app.add_subcommand("train", "train an LSTM stack from scratch");
  train_cmd->add_option("--data", train_o.data, "dataset directory from gen")->required();
  train_cmd->add_option("--seed", train_o.seed, "network init seed")->capture_default_str();
  train_cmd->add_option("--out", train_o.out, "output directory")->required();
  add_net_options(train_cmd, train_o.net);

  TransferOpts tr;
  CLI::App* tr_cmd = app.add_subcommand("transfer", "pretrain on a source, train on a target");
  tr_cmd->add_option("--source-data", tr.source_data, "source dataset directory")->required();
  tr_cmd->add_option("--target-data", tr.target_data, "target dataset directory")->required();
  tr_cmd->add_option("--strategy", tr.strategy, "transfer protocol")
      ->required()
      ->check(CLI::IsMember({"finetune", "freeze"}));
  tr_cmd->add_option("--seed", tr.seed, "network init seed")->capture_default_str();
  tr_cmd->add_option("--source-epochs", tr.source_epochs, "pretraining epoch count");
  tr_cmd->add_option("--frozen", tr.frozen, "layers kept fixed (freeze strategy)")
      ->delimiter(',');
  tr_cmd->add_option("--reinit", tr.reinit, "layers reinitialized (freeze strategy)")
      ->delimiter(',');
  tr_cmd->add_option("--reinit-seed", tr.reinit_seed, "seed for reinitialized layers")
      ->capture_default_str();
  tr_cmd->add_flag("--with-baseline", tr.with_baseline, "also train a scratch baseline");
  tr_cmd->add_option("--baseline-seed", tr.baseline_seed, "baseline init seed (default --seed)");
  tr_cmd->add_option("--out", tr.out, "output directory")->required();
  add_net_options(tr_cmd, tr.net);

  ReportOpts rep;
  CLI::App* rep_cmd = app.add_subcommand("report", "compare baseline and transferred runs");
  rep_cmd->add_option("--baseline", rep.baseline, "baseline metrics.json")->required();
  rep_cmd->add_option("--transferred", rep.transferred, "transferred metrics.json")->required();
  rep_cmd->add_option("--out", rep.out, "comparison JSON path");

  PredictOpts pred;
  CLI::App* pred_cmd = app.add_subcommand("predict", "dump a truth/prediction overlay");
  pred_cmd->add_option("--model", pred.model, "checkpoint path");
  pred_cmd->add_option("--data", pred.data, "dataset directory")->required();
  pred_cmd->add_option("--seq-index", pred.seq_index, "sequence to plot")->capture_default_str();
  pred_cmd->add_option("--split", pred.split, "test or train:<group>")->capture_default_str();
  pred_cmd->add_flag("--self-test", pred.self_test, "feed labels back as predictions");
  pred_cmd->add_option("--out", pred.out, "overlay CSV path")->capture_default_str();

  gen_cmd->callback([&] { run_gen(*gen_cmd, gen); });
  train_cmd->callback([&] { run_train(*train_cmd, train_o); });
  tr_cmd->callback([&] { run_transfer_cmd(*tr_cmd, tr); });
  rep_cmd->callback([&] { run_report(*rep_cmd, rep); });
  pred_cmd->callback([&] {
    if (!pred.self_test && pred.model.empty())
      throw UsageError("predict needs --model unless --self-test is given");
    run_predict(*pred_cmd, pred);
  });

  try {
    apply_thread_cap();
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
