#pragma once

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "sysid/errors.hpp"
#include "sysid/tensor.hpp"

namespace sysid::dynsys {

/// Discrete-time linear time-invariant state-space system
///   x_{n+1} = A x_n + B u_n,   y_n = C x_n + D u_n.
class LtiSystem {
 public:
  /// Validates mutual consistency: A square NxN, B NxM, C PxN, D PxM.
  LtiSystem(Tensor a, Tensor b, Tensor c, Tensor d);

  std::size_t state_dim() const noexcept { return n_; }
  std::size_t input_dim() const noexcept { return m_; }
  std::size_t output_dim() const noexcept { return p_; }

  const Tensor& a() const noexcept { return a_; }
  const Tensor& b() const noexcept { return b_; }
  const Tensor& c() const noexcept { return c_; }
  const Tensor& d() const noexcept { return d_; }

 private:
  Tensor a_, b_, c_, d_;
  std::size_t n_, m_, p_;
};

/// One simulation step from the given state; returns (next_state, output).
std::pair<std::vector<double>, std::vector<double>> lti_step(const LtiSystem& sys,
                                                             std::span<const double> state,
                                                             std::span<const double> input);

/// Difference equation
///   y_N = sum_{i=0..K} a_i u_{N-i} + sum_{j=1..K} b_j y_{N-j},
/// feedback coefficients added with the signs they are stored with.
/// The filter owns its rolling histories; copy it to run independent
/// simulations in parallel.
struct IirFilter {
  /// feedforward holds a_0..a_K, feedback holds b_1..b_K (K >= 1).
  IirFilter(std::vector<double> feedforward, std::vector<double> feedback);

  std::vector<double> ff;      // a_0 .. a_K
  std::vector<double> fb;      // b_1 .. b_K
  std::vector<double> u_hist;  // u_{N-1} .. u_{N-K}
  std::vector<double> y_hist;  // y_{N-1} .. y_{N-K}

  std::size_t order() const noexcept { return fb.size(); }
  void reset();
};

/// Advances the filter by one sample. Rejects non-finite input.
double iir_step(IirFilter& filter, double u);

/// Diode model: slope 10/11 below zero, identity up to the knee, clamped
/// above it. Continuous at 0 and at the knee.
struct DiodeSaturation {
  double lower_slope = 10.0 / 11.0;
  double knee = 3.0 / 10.0;
};

double saturate(const DiodeSaturation& nl, double x);

/// Linear filter -> static nonlinearity -> linear filter cascade.
/// The three blocks share no state.
struct WienerHammerstein {
  IirFilter front;
  DiodeSaturation nonlin;
  IirFilter back;
};

double wh_step(WienerHammerstein& sys, double u);

using System = std::variant<LtiSystem, IirFilter, WienerHammerstein>;

/// Drives a copy of the system over the inputs from zero state/histories.
/// LtiSystem must be single-input single-output here. Throws NumericError
/// carrying the first offending time index, both for non-finite inputs and
/// for a diverging simulation.
std::vector<double> simulate(const System& system, std::span<const double> inputs);

/// Sign handling for the published feedback coefficient sets.
enum class FeedbackConvention {
  as_printed,   // b_j added with their published signs
  subtractive,  // stored b_j negated: y_N = sum a_i u_{N-i} - sum b_j y_{N-j}
};

/// Front filter of the Wiener-Hammerstein benchmark, third-order Chebyshev.
IirFilter wh_front_filter(FeedbackConvention conv = FeedbackConvention::as_printed);

/// Stable low-pass reading of the front filter (denominator signs
/// alternated). The published all-positive feedback puts the dominant pole
/// near 3.0 and overflows within a few hundred steps; neither published
/// sign convention is simulable over benchmark-length sequences.
IirFilter wh_front_filter_stable();

/// Back filter of the Wiener-Hammerstein benchmark; unity DC gain as printed.
IirFilter wh_back_filter(FeedbackConvention conv = FeedbackConvention::as_printed);

/// Second-order Chebyshev source filter; stable as printed.
IirFilter cheby2_source_filter(FeedbackConvention conv = FeedbackConvention::as_printed);

/// Benchmark systems by name. Accepts canonical names (lti3_source,
/// lti2_target, wh_benchmark, cheby2_source) and short aliases (lti3, lti2,
/// wh, cheby2). Unknown names throw ParameterError listing the valid set.
System preset(std::string_view name);

/// Canonical preset names, in a fixed order.
const std::vector<std::string>& preset_names();

/// Maps an alias or canonical name to the canonical form; throws like preset().
std::string canonical_system_name(std::string_view name);

}  // namespace sysid::dynsys
