#include "sysid/data.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <utility>

#include "json.hpp"

#include "binio.hpp"

namespace sysid::data {

using nlohmann::json;
using detail::Reader;
using detail::put_doubles;
using detail::put_u16;
using detail::put_u32;
using detail::write_file;

std::vector<double> sample_truncated_normal(const TruncatedNormalSpec& spec, std::size_t n,
                                            SplitMix64& rng) {
  if (!(spec.sigma > 0.0)) throw ParameterError("truncated normal needs sigma > 0");
  if (!(spec.a < spec.b)) throw ParameterError("truncated normal needs a < b");
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    double x = 0.0;
    std::size_t tries = 0;
    do {
      if (++tries > 100000)
        throw NumericError("truncated normal rejection sampling made no progress", i);
      x = spec.mu + spec.sigma * rng.next_normal();
    } while (!(x > spec.a && x < spec.b));
    out.push_back(x);
  }
  return out;
}

std::vector<double> normalized_index(std::size_t t_len) {
  if (t_len == 0) throw ParameterError("sequence length must be positive");
  std::vector<double> idx(t_len);
  for (std::size_t i = 0; i < t_len; ++i) idx[i] = static_cast<double>(i) / static_cast<double>(t_len);
  return idx;
}

namespace {

void validate_spec(const DatasetSpec& spec) {
  if (spec.n_groups == 0) throw ParameterError("n_groups must be positive");
  if (spec.group_size == 0) throw ParameterError("group_size must be positive");
  if (spec.train_len == 0) throw ParameterError("train_len must be positive");
  if (spec.test_len == 0) throw ParameterError("test_len must be positive");
}

struct SeqError {
  bool set = false;
  std::size_t seq = 0;
  std::string message;
};

/// Fills row `seq` of a dataset from its own RNG substream.
void fill_sequence(const dynsys::System& system, const DatasetSpec& spec, Dataset& ds,
                   std::size_t seq, std::uint64_t stream_id, std::size_t t_len) {
  SplitMix64 rng(substream_seed(spec.seed, stream_id));
  const std::vector<double> u = sample_truncated_normal(spec.input_dist, t_len, rng);
  const std::vector<double> y = dynsys::simulate(system, u);
  const std::vector<double> idx = normalized_index(t_len);
  for (std::size_t t = 0; t < t_len; ++t) {
    ds.features.at(seq, t, 0) = u[t];
    ds.features.at(seq, t, 1) = idx[t];
    ds.labels.at(seq, t, 0) = y[t];
  }
}

Dataset make_dataset(const dynsys::System& system, const DatasetSpec& spec,
                     const std::string& system_name, const std::string& role,
                     std::size_t group_index, std::size_t t_len, std::uint64_t stream_base) {
  Dataset ds{Tensor({spec.group_size, t_len, 2}), Tensor({spec.group_size, t_len, 1}),
             DatasetMeta{system_name, role, group_index, spec}};

  SeqError err;
#pragma omp parallel for schedule(static)
  for (long long s = 0; s < static_cast<long long>(spec.group_size); ++s) {
    const auto seq = static_cast<std::size_t>(s);
    try {
      fill_sequence(system, spec, ds, seq, stream_base + seq, t_len);
    } catch (const std::exception& e) {
#pragma omp critical
      {
        if (!err.set || seq < err.seq) {
          err.set = true;
          err.seq = seq;
          err.message = e.what();
        }
      }
    }
  }
  if (err.set)
    throw NumericError(role + " sequence " + std::to_string(err.seq) + ": " + err.message,
                       err.seq);
  return ds;
}

}  // namespace

DatasetBundle build_dataset(const dynsys::System& system, const DatasetSpec& spec,
                            const std::string& system_name) {
  validate_spec(spec);
  DatasetBundle bundle;
  bundle.train_groups.reserve(spec.n_groups);
  for (std::size_t g = 0; g < spec.n_groups; ++g)
    bundle.train_groups.push_back(make_dataset(system, spec, system_name, "train", g,
                                               spec.train_len, g * spec.group_size));
  bundle.test = make_dataset(system, spec, system_name, "test", 0, spec.test_len,
                             spec.n_groups * spec.group_size);
  return bundle;
}

namespace {

constexpr char kMagic[4] = {'S', 'I', 'D', 'D'};
constexpr std::uint16_t kVersion = 1;

json spec_to_json(const DatasetSpec& spec) {
  return json{{"n_groups", spec.n_groups},
              {"group_size", spec.group_size},
              {"train_len", spec.train_len},
              {"test_len", spec.test_len},
              {"seed", spec.seed},
              {"input_dist",
               {{"mu", spec.input_dist.mu},
                {"sigma", spec.input_dist.sigma},
                {"a", spec.input_dist.a},
                {"b", spec.input_dist.b}}}};
}

DatasetSpec spec_from_json(const json& j) {
  DatasetSpec spec;
  spec.n_groups = j.at("n_groups").get<std::size_t>();
  spec.group_size = j.at("group_size").get<std::size_t>();
  spec.train_len = j.at("train_len").get<std::size_t>();
  spec.test_len = j.at("test_len").get<std::size_t>();
  spec.seed = j.at("seed").get<std::uint64_t>();
  const json& d = j.at("input_dist");
  spec.input_dist.mu = d.at("mu").get<double>();
  spec.input_dist.sigma = d.at("sigma").get<double>();
  spec.input_dist.a = d.at("a").get<double>();
  spec.input_dist.b = d.at("b").get<double>();
  return spec;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  if (ds.features.rank() != 3 || ds.labels.rank() != 3)
    throw DimensionError("dataset tensors must be rank 3");
  if (ds.features.dim(0) != ds.labels.dim(0) || ds.features.dim(1) != ds.labels.dim(1))
    throw DimensionError("features and labels disagree on batch or time");

  json manifest{{"system", ds.meta.system},
                {"role", ds.meta.role},
                {"group_index", ds.meta.group_index},
                {"spec", spec_to_json(ds.meta.spec)},
                {"batch", ds.batch()},
                {"time", ds.time()},
                {"feature_channels", ds.features.dim(2)},
                {"label_channels", ds.labels.dim(2)}};
  const std::string mtext = manifest.dump();

  std::string buf;
  buf.reserve(4 + 2 + 4 + mtext.size() + (ds.features.size() + ds.labels.size()) * sizeof(double));
  buf.append(kMagic, 4);
  put_u16(buf, kVersion);
  put_u32(buf, static_cast<std::uint32_t>(mtext.size()));
  buf += mtext;
  put_doubles(buf, {ds.features.data(), ds.features.size()});
  put_doubles(buf, {ds.labels.data(), ds.labels.size()});
  write_file(path, buf);
}

Dataset load_dataset(const std::filesystem::path& path) {
  Reader r(path);
  r.expect_magic(kMagic);
  if (const auto v = r.u16("version"); v != kVersion)
    throw IoError("unsupported dataset version " + std::to_string(v), r.off - 2);
  const auto mlen = r.u32("manifest length");
  const std::string mtext = r.bytes(mlen, "manifest");

  json manifest;
  try {
    manifest = json::parse(mtext);
  } catch (const json::exception& e) {
    throw IoError(std::string("bad manifest: ") + e.what(), r.off - mlen);
  }

  Dataset ds{Tensor({1}), Tensor({1}), DatasetMeta{}};
  try {
    const auto batch = manifest.at("batch").get<std::size_t>();
    const auto time = manifest.at("time").get<std::size_t>();
    const auto fch = manifest.at("feature_channels").get<std::size_t>();
    const auto lch = manifest.at("label_channels").get<std::size_t>();
    ds.features = Tensor({batch, time, fch});
    ds.labels = Tensor({batch, time, lch});
    ds.meta.system = manifest.at("system").get<std::string>();
    ds.meta.role = manifest.at("role").get<std::string>();
    ds.meta.group_index = manifest.at("group_index").get<std::size_t>();
    ds.meta.spec = spec_from_json(manifest.at("spec"));
  } catch (const json::exception& e) {
    throw IoError(std::string("bad manifest: ") + e.what(), r.off - mlen);
  }

  r.doubles({ds.features.data(), ds.features.size()}, "features");
  r.doubles({ds.labels.data(), ds.labels.size()}, "labels");
  r.expect_eof();
  return ds;
}

void save_bundle(const DatasetBundle& bundle, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
  for (std::size_t g = 0; g < bundle.train_groups.size(); ++g)
    save_dataset(bundle.train_groups[g], dir / ("train_g" + std::to_string(g) + ".sidd"));
  save_dataset(bundle.test, dir / "test.sidd");
}

DatasetBundle load_bundle(const std::filesystem::path& dir) {
  DatasetBundle bundle;
  bundle.test = load_dataset(dir / "test.sidd");
  const std::size_t n = bundle.test.meta.spec.n_groups;
  bundle.train_groups.reserve(n);
  for (std::size_t g = 0; g < n; ++g)
    bundle.train_groups.push_back(load_dataset(dir / ("train_g" + std::to_string(g) + ".sidd")));
  return bundle;
}

void export_csv(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "seq,t,u,idx,y\n";
  char line[160];
  for (std::size_t s = 0; s < ds.batch(); ++s)
    for (std::size_t t = 0; t < ds.time(); ++t) {
      std::snprintf(line, sizeof(line), "%zu,%zu,%.17g,%.17g,%.17g\n", s, t,
                    ds.features.at(s, t, 0), ds.features.at(s, t, 1), ds.labels.at(s, t, 0));
      out << line;
    }
  if (!out) throw IoError("short write to '" + path.string() + "'");
}

VerifyResult verify_labels(const Dataset& ds) {
  dynsys::System system = dynsys::preset("lti2");
  try {
    system = dynsys::preset(ds.meta.system);
  } catch (const ParameterError&) {
    return {VerifyStatus::unknown_system, 0};
  }
  std::vector<double> u(ds.time());
  for (std::size_t s = 0; s < ds.batch(); ++s) {
    for (std::size_t t = 0; t < ds.time(); ++t) u[t] = ds.features.at(s, t, 0);
    const std::vector<double> y = dynsys::simulate(system, u);
    for (std::size_t t = 0; t < ds.time(); ++t)
      if (y[t] != ds.labels.at(s, t, 0)) return {VerifyStatus::mismatch, s};
  }
  return {VerifyStatus::ok, 0};
}

}  // namespace sysid::data
