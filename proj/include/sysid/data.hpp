#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sysid/dynsys.hpp"
#include "sysid/rng.hpp"
#include "sysid/tensor.hpp"

namespace sysid::data {

/// Normal distribution truncated to the open interval (a, b).
struct TruncatedNormalSpec {
  double mu = 0.0;
  double sigma = 1.0;
  double a = -1.0;
  double b = 1.0;
};

/// Rejection sampling against the untruncated normal. Draws are strictly
/// inside (a, b).
std::vector<double> sample_truncated_normal(const TruncatedNormalSpec& spec, std::size_t n,
                                            SplitMix64& rng);

/// The auxiliary input channel: [0/T, 1/T, ..., (T-1)/T].
std::vector<double> normalized_index(std::size_t t_len);

struct DatasetSpec {
  std::size_t n_groups = 5;
  std::size_t group_size = 32;
  std::size_t train_len = 5000;
  std::size_t test_len = 10000;
  std::uint64_t seed = 2021;
  TruncatedNormalSpec input_dist;
};

struct DatasetMeta {
  std::string system;       // canonical preset name, or free-form tag
  std::string role;         // "train" or "test"
  std::size_t group_index;  // meaningful for train groups only
  DatasetSpec spec;
};

/// A batch of sequences. features is (batch, time, 2): excitation and
/// normalized index. labels is (batch, time, 1).
struct Dataset {
  Tensor features;
  Tensor labels;
  DatasetMeta meta;

  std::size_t batch() const { return features.dim(0); }
  std::size_t time() const { return features.dim(1); }
};

struct DatasetBundle {
  std::vector<Dataset> train_groups;
  Dataset test;
};

/// Simulates the system over freshly drawn excitations. Each sequence gets
/// its own RNG substream keyed by a global sequence id (train sequence s of
/// group g -> g*group_size + s, test sequence s -> n_groups*group_size + s),
/// so results do not depend on generation order or thread count.
DatasetBundle build_dataset(const dynsys::System& system, const DatasetSpec& spec,
                            const std::string& system_name);

/// Binary container, magic "SIDD". Round trips are bit exact.
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

/// Directory layout: train_g0.sidd .. train_g{n-1}.sidd plus test.sidd.
void save_bundle(const DatasetBundle& bundle, const std::filesystem::path& dir);
DatasetBundle load_bundle(const std::filesystem::path& dir);

/// Columns: seq,t,u,idx,y with full round-trip precision.
void export_csv(const Dataset& ds, const std::filesystem::path& path);

enum class VerifyStatus { ok, unknown_system, mismatch };

struct VerifyResult {
  VerifyStatus status;
  std::size_t sequence = 0;  // first mismatching sequence when status == mismatch
};

/// Re-simulates the named preset over the stored excitation channel and
/// compares labels bit for bit.
VerifyResult verify_labels(const Dataset& ds);

}  // namespace sysid::data
