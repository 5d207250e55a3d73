// Compares the OpenMP forward/backward kernels against the serial reference
// implementation: wall time per pass and worst-case output disagreement.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"

#include "sysid/data.hpp"
#include "sysid/dynsys.hpp"
#include "sysid/nn.hpp"
#include "sysid/reference.hpp"

using namespace sysid;

namespace {

double best_of(int reps, const std::function<void()>& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

void set_threads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(n);
#else
  (void)n;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace

int main(int argc, char** argv) {
  std::size_t batch = 16, time = 1000;
  std::vector<std::size_t> sizes{8, 16, 32};
  int reps = 5;

  CLI::App app{"forward/backward kernel benchmark: OpenMP vs serial reference"};
  app.add_option("--batch", batch, "sequences per batch")->capture_default_str();
  app.add_option("--time", time, "sequence length")->capture_default_str();
  app.add_option("--sizes", sizes, "LSTM layer widths")->delimiter(',');
  app.add_option("--reps", reps, "repetitions, best time wins")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  const int hw_threads = max_threads();

  data::DatasetSpec spec;
  spec.n_groups = 1;
  spec.group_size = batch;
  spec.train_len = time;
  spec.test_len = time;
  spec.seed = 99;
  const data::DatasetBundle bundle = data::build_dataset(dynsys::preset("lti3"), spec, "lti3");
  const data::Dataset& ds = bundle.train_groups[0];

  const nn::Network net = nn::init_network(sizes, 1);
  std::printf("batch %zu, time %zu, layers", batch, time);
  for (std::size_t s : sizes) std::printf(" %zu", s);
  std::printf(", %zu parameters, %d hardware thread(s)\n\n", net.params().size(), hw_threads);

  // Correctness: production kernel against the reference, every sequence.
  Tensor prod = nn::forward(net, ds.features);
  double max_diff = 0.0;
  for (std::size_t s = 0; s < ds.batch(); ++s) {
    const Tensor one = ref::forward_sequence(net, ds.features, s);
    for (std::size_t t = 0; t < ds.time(); ++t)
      for (std::size_t k = 0; k < one.dim(1); ++k)
        max_diff = std::max(max_diff, std::abs(prod.at(s, t, k) - one.at(t, k)));
  }
  std::printf("max |parallel - reference| over %zu sequences: %.3e\n\n", ds.batch(), max_diff);

  const double t_ref = best_of(reps, [&] {
    for (std::size_t s = 0; s < ds.batch(); ++s) ref::forward_sequence(net, ds.features, s);
  });

  set_threads(1);
  const double t_fwd1 = best_of(reps, [&] { nn::forward(net, ds.features); });
  std::vector<double> grads;
  double t_bwd1 = 0.0;
  {
    nn::ForwardCaches caches;
    nn::forward(net, ds.features, nullptr, &caches);
    t_bwd1 = best_of(reps, [&] { grads = nn::backward(net, caches, ds.labels); });
  }

  set_threads(hw_threads);
  const double t_fwdn = best_of(reps, [&] { nn::forward(net, ds.features); });
  double t_bwdn = 0.0;
  {
    nn::ForwardCaches caches;
    nn::forward(net, ds.features, nullptr, &caches);
    t_bwdn = best_of(reps, [&] { grads = nn::backward(net, caches, ds.labels); });
  }

  std::printf("%-28s %10s %10s\n", "kernel", "ms/pass", "speedup");
  std::printf("%-28s %10.2f %10s\n", "reference forward (serial)", t_ref, "1.00x");
  std::printf("%-28s %10.2f %9.2fx\n", "forward, 1 thread", t_fwd1, t_ref / t_fwd1);
  char label[48];
  std::snprintf(label, sizeof(label), "forward, %d thread(s)", hw_threads);
  std::printf("%-28s %10.2f %9.2fx\n", label, t_fwdn, t_ref / t_fwdn);
  std::printf("%-28s %10.2f %10s\n", "backward, 1 thread", t_bwd1, "-");
  std::snprintf(label, sizeof(label), "backward, %d thread(s)", hw_threads);
  std::printf("%-28s %10.2f %9.2fx\n", label, t_bwdn, t_bwd1 / t_bwdn);
  return 0;
}
