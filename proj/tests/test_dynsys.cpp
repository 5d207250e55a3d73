#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <string>
#include <vector>

#include "sysid/dynsys.hpp"
#include "sysid/rng.hpp"

using namespace sysid;
using namespace sysid::dynsys;

namespace {

Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> vals) {
  Tensor t({rows, cols});
  std::copy(vals.begin(), vals.end(), t.data());
  return t;
}

// Test-side three-term recursion with full histories, no rolling buffers.
std::vector<double> direct_recursion(const std::vector<double>& a, const std::vector<double>& b,
                                     const std::vector<double>& u) {
  std::vector<double> y(u.size(), 0.0);
  for (std::size_t n = 0; n < u.size(); ++n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (n >= i) acc += a[i] * u[n - i];
    for (std::size_t j = 1; j <= b.size(); ++j)
      if (n >= j) acc += b[j - 1] * y[n - j];
    y[n] = acc;
  }
  return y;
}

}  // namespace

TEST_CASE("third-order system impulse response against hand matrix arithmetic") {
  // Plain array arithmetic, written without the library types.
  const double A[3][3] = {{0.60, 0.00, 0.00}, {0.70, 0.15, -0.80}, {0.45, 0.80, 0.45}};
  const double B[3] = {1.60, 0.70, 0.50};
  const double C[3] = {0.05, 0.10, 0.20};
  const double D = 0.01;

  std::vector<double> impulse(10, 0.0);
  impulse[0] = 1.0;
  std::vector<double> expected;
  double x[3] = {0.0, 0.0, 0.0};
  for (std::size_t n = 0; n < impulse.size(); ++n) {
    double y = D * impulse[n];
    for (int i = 0; i < 3; ++i) y += C[i] * x[i];
    expected.push_back(y);
    double nx[3];
    for (int i = 0; i < 3; ++i) {
      nx[i] = B[i] * impulse[n];
      for (int j = 0; j < 3; ++j) nx[i] += A[i][j] * x[j];
    }
    for (int i = 0; i < 3; ++i) x[i] = nx[i];
  }
  CHECK(expected[0] == doctest::Approx(0.01).epsilon(1e-14));
  CHECK(expected[1] == doctest::Approx(0.25).epsilon(1e-14));

  const std::vector<double> got = simulate(preset("lti3_source"), impulse);
  REQUIRE(got.size() == expected.size());
  for (std::size_t n = 0; n < got.size(); ++n)
    CHECK(std::abs(got[n] - expected[n]) < 1e-12);
}

TEST_CASE("second-order target system step response against hand arithmetic") {
  const double A[2][2] = {{0.20, -0.70}, {0.70, 0.50}};
  const double B[2] = {1.00, 0.70};
  const double C[2] = {0.10, 0.25};
  const double D = 0.15;

  std::vector<double> u(8, 1.0);
  std::vector<double> expected;
  double x[2] = {0.0, 0.0};
  for (std::size_t n = 0; n < u.size(); ++n) {
    expected.push_back(C[0] * x[0] + C[1] * x[1] + D * u[n]);
    const double nx0 = A[0][0] * x[0] + A[0][1] * x[1] + B[0] * u[n];
    const double nx1 = A[1][0] * x[0] + A[1][1] * x[1] + B[1] * u[n];
    x[0] = nx0;
    x[1] = nx1;
  }
  const std::vector<double> got = simulate(preset("lti2"), u);
  for (std::size_t n = 0; n < u.size(); ++n)
    CHECK(std::abs(got[n] - expected[n]) < 1e-12);
}

TEST_CASE("lti_step validates shapes and handles multi-input systems") {
  const LtiSystem sys(matrix(2, 2, {1.0, 0.0, 0.0, 1.0}), matrix(2, 2, {1.0, 0.0, 0.0, 2.0}),
                      matrix(1, 2, {1.0, 1.0}), matrix(1, 2, {0.0, 0.0}));
  CHECK(sys.input_dim() == 2);
  const auto [next, out] = lti_step(sys, std::vector<double>{1.0, 2.0}, std::vector<double>{3.0, 4.0});
  CHECK(next[0] == 4.0);
  CHECK(next[1] == 10.0);
  CHECK(out[0] == 3.0);

  CHECK_THROWS_AS(lti_step(sys, std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}),
                  DimensionError);
  CHECK_THROWS_AS(simulate(System(sys), std::vector<double>{1.0}), DimensionError);

  CHECK_THROWS_AS(LtiSystem(matrix(2, 3, {0, 0, 0, 0, 0, 0}), matrix(2, 1, {1, 1}),
                            matrix(1, 2, {1, 1}), matrix(1, 1, {0})),
                  DimensionError);
  CHECK_THROWS_AS(LtiSystem(matrix(2, 2, {0, 0, 0, 0}), matrix(1, 1, {1}),
                            matrix(1, 2, {1, 1}), matrix(1, 1, {0})),
                  DimensionError);
}

TEST_CASE("filter output matches the direct recursion on 1000 random steps") {
  SplitMix64 rng(2024);
  std::vector<double> u(1000);
  for (double& v : u) v = 2.0 * rng.next_double() - 1.0;

  SUBCASE("second-order source filter") {
    const std::vector<double> a{0.0635, 0.1270, 0.0635};
    const std::vector<double> b{1.2129, -0.6646};
    const std::vector<double> want = direct_recursion(a, b, u);
    IirFilter f = cheby2_source_filter();
    for (std::size_t n = 0; n < u.size(); ++n) {
      const double y = iir_step(f, u[n]);
      CHECK(std::abs(y - want[n]) < 1e-10);
    }
  }
  SUBCASE("third-order back filter as printed") {
    const std::vector<double> a{0.7452, 1.3902, 1.3902, 0.7452};
    const std::vector<double> b{-1.4250, -1.2920, -0.5538};
    const std::vector<double> want = direct_recursion(a, b, u);
    IirFilter f = wh_back_filter();
    for (std::size_t n = 0; n < u.size(); ++n) {
      const double y = iir_step(f, u[n]);
      CHECK(std::abs(y - want[n]) < 1e-10);
    }
  }
  SUBCASE("first few samples track the feedforward terms alone") {
    // y_0 = a_0 u_0 before any history accumulates.
    IirFilter f = cheby2_source_filter();
    const double y0 = iir_step(f, u[0]);
    CHECK(y0 == doctest::Approx(0.0635 * u[0]).epsilon(1e-15));
  }
}

TEST_CASE("iir filter construction and stepping reject bad arguments") {
  CHECK_THROWS_AS(IirFilter({1.0}, {}), ParameterError);
  CHECK_THROWS_AS(IirFilter({1.0, 2.0}, {0.5, 0.5}), ParameterError);
  CHECK_THROWS_AS(IirFilter({1.0, std::nan("")}, {0.5}), ParameterError);
  IirFilter f({1.0, 0.5}, {0.1});
  CHECK_THROWS_AS(iir_step(f, std::numeric_limits<double>::infinity()), ParameterError);
  CHECK(f.order() == 1);

  f.u_hist[0] = 9.0;
  f.reset();
  CHECK(f.u_hist[0] == 0.0);
  CHECK(f.y_hist[0] == 0.0);
}

TEST_CASE("diode saturation matches the three-branch formula pointwise") {
  const DiodeSaturation nl;
  auto expected = [](double x) {
    if (x < 0.0) return (10.0 / 11.0) * x;
    if (x <= 3.0 / 10.0) return x;
    return 3.0 / 10.0;
  };
  const double points[] = {-2.0,  -1.0, -0.5, -1e-12, 0.0,  1e-12, 0.15,
                           0.299, 0.3,  0.3 + 1e-12, 0.5,  2.0};
  for (double x : points) CHECK(saturate(nl, x) == expected(x));
  // Boundary continuity.
  CHECK(saturate(nl, 0.0) == 0.0);
  CHECK(saturate(nl, 0.3) == 0.3);
  CHECK(saturate(nl, std::nextafter(0.3, 1.0)) == doctest::Approx(0.3).epsilon(1e-15));
}

TEST_CASE("cascade stepping equals manual front-diode-back composition") {
  SplitMix64 rng(7);
  WienerHammerstein sys{wh_front_filter_stable(), DiodeSaturation{}, wh_back_filter()};
  IirFilter front = wh_front_filter_stable();
  IirFilter back = wh_back_filter();
  for (int n = 0; n < 200; ++n) {
    const double u = 2.0 * rng.next_double() - 1.0;
    const double manual = iir_step(back, saturate(DiodeSaturation{}, iir_step(front, u)));
    CHECK(wh_step(sys, u) == manual);
  }
}

TEST_CASE("benchmark cascade stays finite over long sequences") {
  SplitMix64 rng(99);
  std::vector<double> u(5000);
  for (double& v : u) v = 2.0 * rng.next_double() - 1.0;
  const std::vector<double> y = simulate(preset("wh"), u);
  for (double v : y) CHECK(std::isfinite(v));
  // The cascade is a genuine low-pass: output moves but stays bounded.
  double lo = y[0], hi = y[0];
  for (double v : y) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(hi - lo > 1e-3);
  CHECK(std::abs(hi) < 10.0);
  CHECK(std::abs(lo) < 10.0);
}

TEST_CASE("front filter with published positive feedback diverges quickly") {
  IirFilter f = wh_front_filter(FeedbackConvention::as_printed);
  std::vector<double> u(2000, 0.5);
  bool diverged = false;
  try {
    simulate(System(f), u);
  } catch (const NumericError& e) {
    diverged = true;
    CHECK(e.time_index() < 2000);
  }
  CHECK(diverged);
}

TEST_CASE("subtractive convention negates the stored feedback") {
  IirFilter printed = cheby2_source_filter(FeedbackConvention::as_printed);
  IirFilter sub = cheby2_source_filter(FeedbackConvention::subtractive);
  for (std::size_t j = 0; j < printed.fb.size(); ++j) CHECK(sub.fb[j] == -printed.fb[j]);
  CHECK(sub.ff == printed.ff);

  // Stepping the subtractive filter equals the printed recursion with the
  // feedback sum subtracted.
  SplitMix64 rng(3);
  std::vector<double> u(100);
  for (double& v : u) v = 2.0 * rng.next_double() - 1.0;
  std::vector<double> y(u.size(), 0.0);
  const std::vector<double> a{0.0635, 0.1270, 0.0635};
  const std::vector<double> b{1.2129, -0.6646};
  for (std::size_t n = 0; n < u.size(); ++n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (n >= i) acc += a[i] * u[n - i];
    for (std::size_t j = 1; j <= b.size(); ++j)
      if (n >= j) acc -= b[j - 1] * y[n - j];
    y[n] = acc;
  }
  IirFilter f = cheby2_source_filter(FeedbackConvention::subtractive);
  for (std::size_t n = 0; n < u.size(); ++n)
    CHECK(std::abs(iir_step(f, u[n]) - y[n]) < 1e-12);
}

TEST_CASE("presets and name handling") {
  CHECK(canonical_system_name("lti3") == "lti3_source");
  CHECK(canonical_system_name("lti3_source") == "lti3_source");
  CHECK(canonical_system_name("lti2") == "lti2_target");
  CHECK(canonical_system_name("wh") == "wh_benchmark");
  CHECK(canonical_system_name("cheby2") == "cheby2_source");
  CHECK(preset_names().size() == 4);

  CHECK(std::holds_alternative<LtiSystem>(preset("lti3")));
  CHECK(std::holds_alternative<LtiSystem>(preset("lti2_target")));
  CHECK(std::holds_alternative<WienerHammerstein>(preset("wh_benchmark")));
  CHECK(std::holds_alternative<IirFilter>(preset("cheby2")));

  const System sys3 = preset("lti3");
  const LtiSystem& lti3 = std::get<LtiSystem>(sys3);
  CHECK(lti3.state_dim() == 3);
  CHECK(lti3.a().at(1, 2) == -0.80);
  CHECK(lti3.b().at(0, 0) == 1.60);
  CHECK(lti3.c().at(0, 2) == 0.20);
  CHECK(lti3.d().at(0, 0) == 0.01);

  try {
    preset("bogus");
    FAIL("expected ParameterError");
  } catch (const ParameterError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("lti3_source") != std::string::npos);
    CHECK(msg.find("wh_benchmark") != std::string::npos);
  }
}

TEST_CASE("simulate reports the first bad input index") {
  std::vector<double> u(10, 0.1);
  u[3] = std::nan("");
  try {
    simulate(preset("lti2"), u);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(e.time_index() == 3);
  }
}

TEST_CASE("simulate starts each call from rest") {
  std::vector<double> u{1.0, -0.5, 0.25, 0.8};
  const auto sys = preset("cheby2");
  const auto y1 = simulate(sys, u);
  const auto y2 = simulate(sys, u);
  CHECK(y1 == y2);

  // A filter with dirty histories is copied and cleared inside simulate.
  IirFilter f = cheby2_source_filter();
  iir_step(f, 123.0);
  const auto y3 = simulate(System(f), u);
  CHECK(y3 == y1);
}
