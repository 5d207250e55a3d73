#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sysid/rng.hpp"
#include "sysid/tensor.hpp"

#include "json.hpp"

namespace sysid::nn {

enum class Gate : std::size_t { input = 0, forget = 1, cell = 2, output = 3 };

/// Windows into the flat parameter vector for one gate of one layer.
struct GateView {
  std::span<double> w;  // (units, in) row-major
  std::span<double> u;  // (units, units) row-major
  std::span<double> b;  // (units)
};

struct GateConstView {
  std::span<const double> w;
  std::span<const double> u;
  std::span<const double> b;
};

/// Stacked LSTM layers followed by one dense readout, all parameters in a
/// single flat vector. Per LSTM layer the layout is gates in order
/// input, forget, cell, output; per gate W then U then b. The dense block
/// (W row-major, then b) sits at the end.
class Network {
 public:
  Network(std::vector<std::size_t> lstm_sizes, std::size_t in_dim, std::size_t out_dim);

  const std::vector<std::size_t>& lstm_sizes() const noexcept { return sizes_; }
  std::size_t in_dim() const noexcept { return in_dim_; }
  std::size_t out_dim() const noexcept { return out_dim_; }
  std::size_t n_layers() const noexcept { return sizes_.size() + 1; }

  std::span<double> params() noexcept { return params_; }
  std::span<const double> params() const noexcept { return params_; }
  std::size_t parameter_count() const noexcept { return params_.size(); }

  /// Input width of LSTM layer l (in_dim for l == 0, else sizes[l-1]).
  std::size_t layer_in(std::size_t layer) const;

  GateView gate(std::size_t layer, Gate g);
  GateConstView gate(std::size_t layer, Gate g) const;

  std::span<double> dense_w();
  std::span<const double> dense_w() const;
  std::span<double> dense_b();
  std::span<const double> dense_b() const;

  /// [begin, end) into params() for layer k; k == lstm count is the dense
  /// layer.
  std::pair<std::size_t, std::size_t> layer_range(std::size_t layer) const;

  /// "LSTM1", ..., "LSTMk", "Dense".
  std::vector<std::string> layer_names() const;

 private:
  std::vector<std::size_t> sizes_;
  std::size_t in_dim_, out_dim_;
  std::vector<double> params_;
  std::vector<std::size_t> layer_offsets_;  // n_layers()+1 entries
};

/// Glorot-uniform weights from a single SplitMix64 stream, biases zero
/// except forget-gate biases set to 1.
Network init_network(const std::vector<std::size_t>& lstm_sizes, std::uint64_t seed,
                     std::size_t in_dim = 2, std::size_t out_dim = 1);

/// Marks which parameters adam_step may update.
struct TrainMask {
  std::vector<std::uint8_t> trainable;

  static TrainMask all(const Network& net);
  /// Everything trainable except the named layers ("LSTM1", "Dense", ...).
  static TrainMask from_frozen(const Network& net, const std::vector<std::string>& frozen);
};

/// Intermediate values of one cell step, kept for backprop.
struct CellCache {
  std::vector<double> x;      // input at this step
  std::vector<double> h_prev;
  std::vector<double> c_prev;
  std::vector<double> i, f, g, o;  // post-activation gates
  std::vector<double> c;
  std::vector<double> tanh_c;
};

/// One LSTM cell step:
///   i,f,o = logistic(W x + U h_prev + b),  g = tanh(...)
///   c = f * c_prev + i * g,  h = o * tanh(c).
/// h and c are overwritten in place. Pass cache to record intermediates.
void lstm_cell_forward(const Network& net, std::size_t layer, std::span<const double> x,
                       std::vector<double>& h, std::vector<double>& c,
                       CellCache* cache = nullptr);

/// Per-sequence hidden and cell state for every LSTM layer; carried across
/// window boundaries during truncated BPTT.
struct SequenceState {
  std::vector<std::vector<double>> h;  // per layer
  std::vector<std::vector<double>> c;

  static SequenceState zeros(const Network& net);
};

/// Backprop bookkeeping for a forward pass over a whole batch.
struct ForwardCaches {
  // [seq][t][layer]
  std::vector<std::vector<std::vector<CellCache>>> cells;
  std::vector<std::vector<std::vector<double>>> outputs;  // [seq][t] dense outputs
  std::size_t batch = 0, time = 0;
  std::uint64_t params_stamp = 0;
};

/// Runs the stack over features (batch, time, in_dim) and returns
/// predictions (batch, time, out_dim). Sequences are independent and run in
/// parallel. states, when given, supplies the initial per-sequence states
/// and receives the final ones. Throws NumericError naming layer and time
/// step if activations go non-finite.
Tensor forward(const Network& net, const Tensor& features,
               std::vector<SequenceState>* states = nullptr, ForwardCaches* caches = nullptr);

/// Mean squared error over all elements, compensated summation.
double mse(const Tensor& pred, const Tensor& target);

/// Gradient of mse(forward(net, features), labels) with respect to every
/// parameter, using the caches of the matching forward call. Sequences are
/// processed in parallel; their contributions are reduced in sequence order
/// so the result does not depend on thread count.
std::vector<double> backward(const Network& net, const ForwardCaches& caches,
                             const Tensor& labels);

struct AdamConfig {
  double alpha = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m, v;
  std::uint64_t t = 0;
  AdamConfig cfg;

  static AdamState init(const Network& net, const AdamConfig& cfg = {});
};

/// One Adam update in place. The step counter advances once per call;
/// masked-out parameters are left untouched (moments included).
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const TrainMask* mask = nullptr);

/// Binary checkpoint, magic "SIDM". provenance is free-form JSON recorded in
/// the header. Round trips are bit exact.
void save_checkpoint(const Network& net, const std::filesystem::path& path,
                     const nlohmann::json& provenance);
Network load_checkpoint(const std::filesystem::path& path, nlohmann::json* header = nullptr);

}  // namespace sysid::nn
