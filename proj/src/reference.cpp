#include "sysid/reference.hpp"

#include <cmath>
#include <vector>

namespace sysid::ref {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// a = W x + U h + b for one gate, written as plain index arithmetic.
std::vector<double> affine(std::span<const double> w, std::span<const double> u,
                           std::span<const double> b, const std::vector<double>& x,
                           const std::vector<double>& h) {
  const std::size_t units = b.size();
  const std::size_t in = x.size();
  std::vector<double> a(units);
  for (std::size_t r = 0; r < units; ++r) {
    double s = b[r];
    for (std::size_t j = 0; j < in; ++j) s += w[r * in + j] * x[j];
    for (std::size_t j = 0; j < units; ++j) s += u[r * units + j] * h[j];
    a[r] = s;
  }
  return a;
}

}  // namespace

Tensor forward_sequence(const nn::Network& net, const Tensor& features, std::size_t seq) {
  if (features.rank() != 3) throw DimensionError("features must be (batch, time, channels)");
  if (features.dim(2) != net.in_dim()) throw DimensionError("features channel width mismatch");
  if (seq >= features.dim(0)) throw DimensionError("sequence index out of range");

  const std::size_t time = features.dim(1);
  const std::size_t n_lstm = net.lstm_sizes().size();
  Tensor out({time, net.out_dim()});

  std::vector<std::vector<double>> h(n_lstm), c(n_lstm);
  for (std::size_t l = 0; l < n_lstm; ++l) {
    h[l].assign(net.lstm_sizes()[l], 0.0);
    c[l].assign(net.lstm_sizes()[l], 0.0);
  }

  for (std::size_t t = 0; t < time; ++t) {
    std::vector<double> x(net.in_dim());
    for (std::size_t j = 0; j < net.in_dim(); ++j) x[j] = features.at(seq, t, j);

    for (std::size_t l = 0; l < n_lstm; ++l) {
      const std::size_t units = net.lstm_sizes()[l];
      const auto gi = net.gate(l, nn::Gate::input);
      const auto gf = net.gate(l, nn::Gate::forget);
      const auto gg = net.gate(l, nn::Gate::cell);
      const auto go = net.gate(l, nn::Gate::output);

      const std::vector<double> ai = affine(gi.w, gi.u, gi.b, x, h[l]);
      const std::vector<double> af = affine(gf.w, gf.u, gf.b, x, h[l]);
      const std::vector<double> ag = affine(gg.w, gg.u, gg.b, x, h[l]);
      const std::vector<double> ao = affine(go.w, go.u, go.b, x, h[l]);

      for (std::size_t r = 0; r < units; ++r) {
        const double cv = sigmoid(af[r]) * c[l][r] + sigmoid(ai[r]) * std::tanh(ag[r]);
        c[l][r] = cv;
        h[l][r] = sigmoid(ao[r]) * std::tanh(cv);
      }
      x = h[l];
    }

    const auto w = net.dense_w();
    const auto b = net.dense_b();
    const std::size_t last = net.lstm_sizes().back();
    for (std::size_t o = 0; o < net.out_dim(); ++o) {
      double s = b[o];
      for (std::size_t j = 0; j < last; ++j) s += w[o * last + j] * h[n_lstm - 1][j];
      out.at(t, o) = s;
    }
  }
  return out;
}

double mse_two_pass(const Tensor& pred, const Tensor& target) {
  if (!pred.same_shape(target)) throw DimensionError("prediction and target shapes differ");
  if (pred.size() == 0) throw DimensionError("cannot take the MSE of empty tensors");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred.data()[i] - target.data()[i];
    sum += d * d;
  }
  return sum / static_cast<double>(pred.size());
}

}  // namespace sysid::ref
