#include "sysid/dynsys.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace sysid::dynsys {

namespace {

void require_matrix(const Tensor& t, const char* name) {
  if (t.rank() != 2) throw DimensionError(std::string(name) + " must be a rank-2 tensor");
}

}  // namespace

LtiSystem::LtiSystem(Tensor a, Tensor b, Tensor c, Tensor d)
    : a_(std::move(a)), b_(std::move(b)), c_(std::move(c)), d_(std::move(d)) {
  require_matrix(a_, "A");
  require_matrix(b_, "B");
  require_matrix(c_, "C");
  require_matrix(d_, "D");
  n_ = a_.dim(0);
  if (a_.dim(1) != n_) throw DimensionError("A must be square");
  m_ = b_.dim(1);
  p_ = c_.dim(0);
  if (b_.dim(0) != n_) throw DimensionError("B must have as many rows as A");
  if (c_.dim(1) != n_) throw DimensionError("C must have as many columns as A");
  if (d_.dim(0) != p_ || d_.dim(1) != m_)
    throw DimensionError("D must be output_dim x input_dim");
  if (n_ == 0 || m_ == 0 || p_ == 0) throw DimensionError("all system dimensions must be nonzero");
}

std::pair<std::vector<double>, std::vector<double>> lti_step(const LtiSystem& sys,
                                                             std::span<const double> state,
                                                             std::span<const double> input) {
  const std::size_t n = sys.state_dim(), m = sys.input_dim(), p = sys.output_dim();
  if (state.size() != n) throw DimensionError("state size does not match the system");
  if (input.size() != m) throw DimensionError("input size does not match the system");

  std::vector<double> next(n, 0.0), out(p, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += sys.a().at(i, j) * state[j];
    for (std::size_t j = 0; j < m; ++j) acc += sys.b().at(i, j) * input[j];
    next[i] = acc;
  }
  for (std::size_t i = 0; i < p; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += sys.c().at(i, j) * state[j];
    for (std::size_t j = 0; j < m; ++j) acc += sys.d().at(i, j) * input[j];
    out[i] = acc;
  }
  return {std::move(next), std::move(out)};
}

IirFilter::IirFilter(std::vector<double> feedforward, std::vector<double> feedback)
    : ff(std::move(feedforward)), fb(std::move(feedback)) {
  if (fb.empty()) throw ParameterError("IIR filter needs at least one feedback coefficient");
  if (ff.size() != fb.size() + 1)
    throw ParameterError("IIR filter needs exactly one more feedforward than feedback coefficient");
  for (double v : ff)
    if (!std::isfinite(v)) throw ParameterError("non-finite feedforward coefficient");
  for (double v : fb)
    if (!std::isfinite(v)) throw ParameterError("non-finite feedback coefficient");
  reset();
}

void IirFilter::reset() {
  u_hist.assign(order(), 0.0);
  y_hist.assign(order(), 0.0);
}

double iir_step(IirFilter& filter, double u) {
  if (!std::isfinite(u)) throw ParameterError("non-finite filter input");
  const std::size_t k = filter.order();
  double y = filter.ff[0] * u;
  for (std::size_t i = 0; i < k; ++i) y += filter.ff[i + 1] * filter.u_hist[i];
  for (std::size_t j = 0; j < k; ++j) y += filter.fb[j] * filter.y_hist[j];

  std::rotate(filter.u_hist.rbegin(), filter.u_hist.rbegin() + 1, filter.u_hist.rend());
  std::rotate(filter.y_hist.rbegin(), filter.y_hist.rbegin() + 1, filter.y_hist.rend());
  filter.u_hist[0] = u;
  filter.y_hist[0] = y;
  return y;
}

double saturate(const DiodeSaturation& nl, double x) {
  if (x < 0.0) return nl.lower_slope * x;
  if (x > nl.knee) return nl.knee;
  return x;
}

double wh_step(WienerHammerstein& sys, double u) {
  return iir_step(sys.back, saturate(sys.nonlin, iir_step(sys.front, u)));
}

namespace {

void check_inputs(std::span<const double> inputs) {
  for (std::size_t i = 0; i < inputs.size(); ++i)
    if (!std::isfinite(inputs[i])) throw NumericError("non-finite input sample", i);
}

std::vector<double> simulate_lti(const LtiSystem& sys, std::span<const double> inputs) {
  if (sys.input_dim() != 1 || sys.output_dim() != 1)
    throw DimensionError("sequence simulation expects a SISO system");
  std::vector<double> state(sys.state_dim(), 0.0), out;
  out.reserve(inputs.size());
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    auto [next, y] = lti_step(sys, state, std::span<const double>(&inputs[t], 1));
    if (!std::isfinite(y[0])) throw NumericError("LTI simulation diverged", t);
    out.push_back(y[0]);
    state = std::move(next);
  }
  return out;
}

template <class Sys, class Step>
std::vector<double> simulate_stepper(Sys sys, std::span<const double> inputs, Step step,
                                     const char* what) {
  std::vector<double> out;
  out.reserve(inputs.size());
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    double y = step(sys, inputs[t]);
    if (!std::isfinite(y)) throw NumericError(what, t);
    out.push_back(y);
  }
  return out;
}

}  // namespace

std::vector<double> simulate(const System& system, std::span<const double> inputs) {
  check_inputs(inputs);
  return std::visit(
      [&](const auto& sys) -> std::vector<double> {
        using T = std::decay_t<decltype(sys)>;
        if constexpr (std::is_same_v<T, LtiSystem>) {
          return simulate_lti(sys, inputs);
        } else if constexpr (std::is_same_v<T, IirFilter>) {
          IirFilter copy = sys;
          copy.reset();
          return simulate_stepper(
              std::move(copy), inputs,
              [](IirFilter& f, double u) { return iir_step(f, u); },
              "filter simulation diverged");
        } else {
          WienerHammerstein copy = sys;
          copy.front.reset();
          copy.back.reset();
          return simulate_stepper(
              std::move(copy), inputs, [](WienerHammerstein& w, double u) { return wh_step(w, u); },
              "system simulation diverged");
        }
      },
      system);
}

namespace {

std::vector<double> apply_convention(std::vector<double> fb, FeedbackConvention conv) {
  if (conv == FeedbackConvention::subtractive)
    for (double& v : fb) v = -v;
  return fb;
}

Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> vals) {
  Tensor t({rows, cols});
  std::copy(vals.begin(), vals.end(), t.data());
  return t;
}

LtiSystem lti3_source() {
  return LtiSystem(matrix(3, 3,
                          {0.60, 0.00, 0.00,
                           0.70, 0.15, -0.80,
                           0.45, 0.80, 0.45}),
                   matrix(3, 1, {1.60, 0.70, 0.50}),
                   matrix(1, 3, {0.05, 0.10, 0.20}),
                   matrix(1, 1, {0.01}));
}

LtiSystem lti2_target() {
  return LtiSystem(matrix(2, 2,
                          {0.20, -0.70,
                           0.70, 0.50}),
                   matrix(2, 1, {1.00, 0.70}),
                   matrix(1, 2, {0.10, 0.25}),
                   matrix(1, 1, {0.15}));
}

}  // namespace

IirFilter wh_front_filter(FeedbackConvention conv) {
  return IirFilter({0.0083, 0.0248, 0.0248, 0.0083},
                   apply_convention({2.2800, 1.9766, 0.6307}, conv));
}

IirFilter wh_front_filter_stable() {
  return IirFilter({0.0083, 0.0248, 0.0248, 0.0083}, {2.2800, -1.9766, 0.6307});
}

IirFilter wh_back_filter(FeedbackConvention conv) {
  return IirFilter({0.7452, 1.3902, 1.3902, 0.7452},
                   apply_convention({-1.4250, -1.2920, -0.5538}, conv));
}

IirFilter cheby2_source_filter(FeedbackConvention conv) {
  return IirFilter({0.0635, 0.1270, 0.0635}, apply_convention({1.2129, -0.6646}, conv));
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"lti3_source", "lti2_target", "wh_benchmark",
                                                 "cheby2_source"};
  return names;
}

std::string canonical_system_name(std::string_view name) {
  if (name == "lti3_source" || name == "lti3") return "lti3_source";
  if (name == "lti2_target" || name == "lti2") return "lti2_target";
  if (name == "wh_benchmark" || name == "wh") return "wh_benchmark";
  if (name == "cheby2_source" || name == "cheby2") return "cheby2_source";
  std::string valid;
  for (const auto& n : preset_names()) {
    if (!valid.empty()) valid += ", ";
    valid += n;
  }
  throw ParameterError("unknown system '" + std::string(name) + "' (valid: " + valid + ")");
}

System preset(std::string_view name) {
  const std::string canon = canonical_system_name(name);
  if (canon == "lti3_source") return lti3_source();
  if (canon == "lti2_target") return lti2_target();
  if (canon == "cheby2_source") return cheby2_source_filter();
  return WienerHammerstein{wh_front_filter_stable(), DiodeSaturation{}, wh_back_filter()};
}

}  // namespace sysid::dynsys
