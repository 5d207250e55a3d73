#include "sysid/nn.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <utility>

#include "binio.hpp"

namespace sysid::nn {

using nlohmann::json;

namespace {

constexpr std::size_t kGates = 4;

std::size_t gate_block(std::size_t units, std::size_t in) { return units * (in + units + 1); }

std::size_t lstm_block(std::size_t units, std::size_t in) { return kGates * gate_block(units, in); }

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::uint64_t fnv1a(std::span<const double> vals) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  const auto* p = reinterpret_cast<const unsigned char*>(vals.data());
  for (std::size_t i = 0; i < vals.size() * sizeof(double); ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

Network::Network(std::vector<std::size_t> lstm_sizes, std::size_t in_dim, std::size_t out_dim)
    : sizes_(std::move(lstm_sizes)), in_dim_(in_dim), out_dim_(out_dim) {
  if (sizes_.empty()) throw ParameterError("network needs at least one LSTM layer");
  if (in_dim_ == 0 || out_dim_ == 0)
    throw ParameterError("network needs nonzero input and output widths");
  for (std::size_t u : sizes_)
    if (u == 0) throw ParameterError("LSTM layer sizes must be positive");

  layer_offsets_.assign(n_layers() + 1, 0);
  std::size_t off = 0;
  for (std::size_t l = 0; l < sizes_.size(); ++l) {
    layer_offsets_[l] = off;
    off += lstm_block(sizes_[l], layer_in(l));
  }
  layer_offsets_[sizes_.size()] = off;
  off += out_dim_ * sizes_.back() + out_dim_;
  layer_offsets_[n_layers()] = off;
  params_.assign(off, 0.0);
}

std::size_t Network::layer_in(std::size_t layer) const {
  if (layer >= sizes_.size()) throw ParameterError("LSTM layer index out of range");
  return layer == 0 ? in_dim_ : sizes_[layer - 1];
}

GateConstView Network::gate(std::size_t layer, Gate g) const {
  const std::size_t in = layer_in(layer);
  const std::size_t u = sizes_[layer];
  const std::size_t start = layer_offsets_[layer] + static_cast<std::size_t>(g) * gate_block(u, in);
  const double* p = params_.data() + start;
  return {{p, u * in}, {p + u * in, u * u}, {p + u * in + u * u, u}};
}

GateView Network::gate(std::size_t layer, Gate g) {
  const GateConstView cv = std::as_const(*this).gate(layer, g);
  double* base = params_.data();
  auto mut = [&](std::span<const double> s) {
    return std::span<double>(base + (s.data() - params_.data()), s.size());
  };
  return {mut(cv.w), mut(cv.u), mut(cv.b)};
}

std::span<double> Network::dense_w() {
  return params().subspan(layer_offsets_[sizes_.size()], out_dim_ * sizes_.back());
}
std::span<const double> Network::dense_w() const {
  return params().subspan(layer_offsets_[sizes_.size()], out_dim_ * sizes_.back());
}
std::span<double> Network::dense_b() {
  return params().subspan(layer_offsets_[sizes_.size()] + out_dim_ * sizes_.back(), out_dim_);
}
std::span<const double> Network::dense_b() const {
  return params().subspan(layer_offsets_[sizes_.size()] + out_dim_ * sizes_.back(), out_dim_);
}

std::pair<std::size_t, std::size_t> Network::layer_range(std::size_t layer) const {
  if (layer >= n_layers()) throw ParameterError("layer index out of range");
  return {layer_offsets_[layer], layer_offsets_[layer + 1]};
}

std::vector<std::string> Network::layer_names() const {
  std::vector<std::string> names;
  names.reserve(n_layers());
  for (std::size_t l = 0; l < sizes_.size(); ++l) names.push_back("LSTM" + std::to_string(l + 1));
  names.push_back("Dense");
  return names;
}

Network init_network(const std::vector<std::size_t>& lstm_sizes, std::uint64_t seed,
                     std::size_t in_dim, std::size_t out_dim) {
  Network net(lstm_sizes, in_dim, out_dim);
  SplitMix64 rng(seed);
  auto glorot = [&rng](std::span<double> w, std::size_t rows, std::size_t cols) {
    const double s = std::sqrt(6.0 / static_cast<double>(rows + cols));
    for (double& v : w) v = (2.0 * rng.next_double() - 1.0) * s;
  };
  for (std::size_t l = 0; l < lstm_sizes.size(); ++l) {
    const std::size_t u = net.lstm_sizes()[l], in = net.layer_in(l);
    for (std::size_t g = 0; g < kGates; ++g) {
      GateView gv = net.gate(l, static_cast<Gate>(g));
      glorot(gv.w, u, in);
      glorot(gv.u, u, u);
      const double bias = static_cast<Gate>(g) == Gate::forget ? 1.0 : 0.0;
      std::fill(gv.b.begin(), gv.b.end(), bias);
    }
  }
  glorot(net.dense_w(), out_dim, lstm_sizes.back());
  std::fill(net.dense_b().begin(), net.dense_b().end(), 0.0);
  return net;
}

TrainMask TrainMask::all(const Network& net) {
  TrainMask mask;
  mask.trainable.assign(net.parameter_count(), 1);
  return mask;
}

TrainMask TrainMask::from_frozen(const Network& net, const std::vector<std::string>& frozen) {
  TrainMask mask = all(net);
  const auto names = net.layer_names();
  for (const auto& name : frozen) {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw ParameterError("unknown layer '" + name + "'");
    const auto [begin, end] = net.layer_range(static_cast<std::size_t>(it - names.begin()));
    std::fill(mask.trainable.begin() + static_cast<std::ptrdiff_t>(begin),
              mask.trainable.begin() + static_cast<std::ptrdiff_t>(end), 0);
  }
  return mask;
}

namespace {

/// Unchecked cell step. All gate pre-activations read the incoming h, so h
/// is rewritten only after every row's gates are computed; o_scratch backs
/// the output gate when no cache is recording it.
void cell_step(const Network& net, std::size_t layer, std::span<const double> x,
               std::vector<double>& h, std::vector<double>& c, CellCache* cache,
               std::vector<double>& o_scratch) {
  const std::size_t units = net.lstm_sizes()[layer];
  const std::size_t in = x.size();

  if (cache) {
    cache->x.assign(x.begin(), x.end());
    cache->h_prev = h;
    cache->c_prev = c;
    cache->i.resize(units);
    cache->f.resize(units);
    cache->g.resize(units);
    cache->o.resize(units);
    cache->c.resize(units);
    cache->tanh_c.resize(units);
  }
  std::vector<double>& ovec = cache ? cache->o : o_scratch;
  ovec.resize(units);

  const GateConstView gi = net.gate(layer, Gate::input);
  const GateConstView gf = net.gate(layer, Gate::forget);
  const GateConstView gg = net.gate(layer, Gate::cell);
  const GateConstView go = net.gate(layer, Gate::output);

  auto preact = [&](const GateConstView& gv, std::size_t r) {
    double acc = gv.b[r];
    const double* wr = gv.w.data() + r * in;
    for (std::size_t j = 0; j < in; ++j) acc += wr[j] * x[j];
    const double* ur = gv.u.data() + r * units;
    for (std::size_t j = 0; j < units; ++j) acc += ur[j] * h[j];
    return acc;
  };

  for (std::size_t r = 0; r < units; ++r) {
    const double iv = logistic(preact(gi, r));
    const double fv = logistic(preact(gf, r));
    const double gv = std::tanh(preact(gg, r));
    ovec[r] = logistic(preact(go, r));
    const double cv = fv * c[r] + iv * gv;
    if (cache) {
      cache->i[r] = iv;
      cache->f[r] = fv;
      cache->g[r] = gv;
      cache->c[r] = cv;
    }
    c[r] = cv;
  }
  for (std::size_t r = 0; r < units; ++r) {
    const double th = std::tanh(c[r]);
    if (cache) cache->tanh_c[r] = th;
    h[r] = ovec[r] * th;
  }
}

void dense_forward(const Network& net, std::span<const double> h, std::span<double> y) {
  const std::size_t out = net.out_dim(), in = h.size();
  const std::span<const double> w = net.dense_w();
  const std::span<const double> b = net.dense_b();
  for (std::size_t o = 0; o < out; ++o) {
    double acc = b[o];
    const double* wr = w.data() + o * in;
    for (std::size_t j = 0; j < in; ++j) acc += wr[j] * h[j];
    y[o] = acc;
  }
}

bool finite_sum(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (double v : a) s += v;
  for (double v : b) s += v;
  return std::isfinite(s);
}

struct ParallelError {
  std::atomic<bool> set{false};
  std::size_t seq = 0;
  std::size_t time = 0;
  std::string message;

  // Call under a critical section only.
  void record(std::size_t s, std::size_t t, const std::string& msg) {
    if (!set.load() || s < seq) {
      seq = s;
      time = t;
      message = msg;
      set.store(true);
    }
  }
};

}  // namespace

void lstm_cell_forward(const Network& net, std::size_t layer, std::span<const double> x,
                       std::vector<double>& h, std::vector<double>& c, CellCache* cache) {
  if (layer >= net.lstm_sizes().size()) throw ParameterError("LSTM layer index out of range");
  const std::size_t units = net.lstm_sizes()[layer];
  if (x.size() != net.layer_in(layer)) throw DimensionError("cell input width mismatch");
  if (h.size() != units || c.size() != units) throw DimensionError("cell state width mismatch");
  std::vector<double> scratch;
  cell_step(net, layer, x, h, c, cache, scratch);
}

SequenceState SequenceState::zeros(const Network& net) {
  SequenceState st;
  st.h.reserve(net.lstm_sizes().size());
  st.c.reserve(net.lstm_sizes().size());
  for (std::size_t u : net.lstm_sizes()) {
    st.h.emplace_back(u, 0.0);
    st.c.emplace_back(u, 0.0);
  }
  return st;
}

Tensor forward(const Network& net, const Tensor& features, std::vector<SequenceState>* states,
               ForwardCaches* caches) {
  if (features.rank() != 3) throw DimensionError("features must be (batch, time, channels)");
  if (features.dim(2) != net.in_dim())
    throw DimensionError("features channel count does not match the network input width");
  const std::size_t batch = features.dim(0), time = features.dim(1);
  const std::size_t n_lstm = net.lstm_sizes().size();

  if (states) {
    if (states->empty()) states->assign(batch, SequenceState::zeros(net));
    if (states->size() != batch) throw DimensionError("state count does not match the batch");
    for (const SequenceState& st : *states) {
      if (st.h.size() != n_lstm || st.c.size() != n_lstm)
        throw DimensionError("state layer count does not match the network");
      for (std::size_t l = 0; l < n_lstm; ++l)
        if (st.h[l].size() != net.lstm_sizes()[l] || st.c[l].size() != net.lstm_sizes()[l])
          throw DimensionError("state width does not match the network");
    }
  }
  if (caches) {
    caches->cells.assign(batch, {});
    caches->outputs.assign(batch, {});
    caches->batch = batch;
    caches->time = time;
    caches->params_stamp = fnv1a(net.params());
  }

  Tensor out({batch, time, net.out_dim()});
  const auto names = net.layer_names();
  ParallelError err;

#pragma omp parallel for schedule(static)
  for (long long sq = 0; sq < static_cast<long long>(batch); ++sq) {
    const auto s = static_cast<std::size_t>(sq);
    if (err.set.load()) continue;
    SequenceState local;
    if (!states) local = SequenceState::zeros(net);
    SequenceState& st = states ? (*states)[s] : local;
    std::vector<double> scratch;

    if (caches) {
      caches->cells[s].assign(time, std::vector<CellCache>(n_lstm));
      caches->outputs[s].assign(time, std::vector<double>(net.out_dim()));
    }
    bool bad = false;
    for (std::size_t t = 0; t < time && !bad; ++t) {
      std::span<const double> x(features.data() + (s * time + t) * net.in_dim(), net.in_dim());
      for (std::size_t l = 0; l < n_lstm; ++l) {
        CellCache* cc = caches ? &caches->cells[s][t][l] : nullptr;
        cell_step(net, l, x, st.h[l], st.c[l], cc, scratch);
        if (!finite_sum(st.h[l], st.c[l])) {
#pragma omp critical
          err.record(s, t, "activations diverged in " + names[l]);
          bad = true;
          break;
        }
        x = std::span<const double>(st.h[l]);
      }
      if (bad) break;
      std::span<double> y(out.data() + (s * time + t) * net.out_dim(), net.out_dim());
      dense_forward(net, st.h[n_lstm - 1], y);
      if (!finite_sum(y, {})) {
#pragma omp critical
        err.record(s, t, "activations diverged in " + names[n_lstm]);
        bad = true;
      }
      if (caches && !bad) std::copy(y.begin(), y.end(), caches->outputs[s][t].begin());
    }
  }
  if (err.set)
    throw NumericError("sequence " + std::to_string(err.seq) + ": " + err.message + " at step " +
                           std::to_string(err.time),
                       err.time);
  return out;
}

double mse(const Tensor& pred, const Tensor& target) {
  if (!pred.same_shape(target)) throw DimensionError("prediction and target shapes differ");
  if (pred.size() == 0) throw DimensionError("cannot take the MSE of empty tensors");
  CompensatedSum sum;
  const double* p = pred.data();
  const double* q = target.data();
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = p[i] - q[i];
    sum.add(d * d);
  }
  return sum.value() / static_cast<double>(pred.size());
}

namespace {

/// BPTT over one sequence; writes parameter gradients into grad.
void backward_sequence(const Network& net, const ForwardCaches& caches, const Tensor& labels,
                       std::size_t s, std::vector<double>& grad) {
  const std::size_t time = caches.time;
  const std::size_t n_lstm = net.lstm_sizes().size();
  const std::size_t out = net.out_dim();
  const double scale =
      2.0 / static_cast<double>(caches.batch * time * out);

  const std::size_t dense_off = net.layer_range(n_lstm).first;
  const std::size_t last = net.lstm_sizes().back();

  std::vector<std::vector<double>> dh_next(n_lstm), dc_next(n_lstm), d_above(n_lstm);
  for (std::size_t l = 0; l < n_lstm; ++l) {
    dh_next[l].assign(net.lstm_sizes()[l], 0.0);
    dc_next[l].assign(net.lstm_sizes()[l], 0.0);
    d_above[l].assign(net.lstm_sizes()[l], 0.0);
  }
  std::vector<double> dy(out);
  const std::size_t max_units = *std::max_element(net.lstm_sizes().begin(), net.lstm_sizes().end());
  std::vector<double> da_i(max_units), da_f(max_units), da_g(max_units), da_o(max_units);

  const std::span<const double> dense_w = net.dense_w();

  for (std::size_t t = time; t-- > 0;) {
    const std::vector<CellCache>& row = caches.cells[s][t];

    for (std::size_t o = 0; o < out; ++o)
      dy[o] = scale * (caches.outputs[s][t][o] - labels.at(s, t, o));

    std::fill(d_above[n_lstm - 1].begin(), d_above[n_lstm - 1].end(), 0.0);
    const CellCache& top = row[n_lstm - 1];
    for (std::size_t o = 0; o < out; ++o) {
      for (std::size_t j = 0; j < last; ++j) {
        const double h_top = top.o[j] * top.tanh_c[j];
        grad[dense_off + o * last + j] += dy[o] * h_top;
        d_above[n_lstm - 1][j] += dense_w[o * last + j] * dy[o];
      }
      grad[dense_off + out * last + o] += dy[o];
    }

    for (std::size_t l = n_lstm; l-- > 0;) {
      const CellCache& cc = row[l];
      const std::size_t units = net.lstm_sizes()[l];
      const std::size_t in = net.layer_in(l);

      for (std::size_t r = 0; r < units; ++r) {
        const double dh = d_above[l][r] + dh_next[l][r];
        const double th = cc.tanh_c[r];
        const double dc = dc_next[l][r] + dh * cc.o[r] * (1.0 - th * th);
        const double do_ = dh * th;
        const double di = dc * cc.g[r];
        const double df = dc * cc.c_prev[r];
        const double dg = dc * cc.i[r];
        da_i[r] = di * cc.i[r] * (1.0 - cc.i[r]);
        da_f[r] = df * cc.f[r] * (1.0 - cc.f[r]);
        da_g[r] = dg * (1.0 - cc.g[r] * cc.g[r]);
        da_o[r] = do_ * cc.o[r] * (1.0 - cc.o[r]);
        dc_next[l][r] = dc * cc.f[r];
      }

      std::fill(dh_next[l].begin(), dh_next[l].end(), 0.0);
      if (l > 0) std::fill(d_above[l - 1].begin(), d_above[l - 1].end(), 0.0);

      const double* das[kGates] = {da_i.data(), da_f.data(), da_g.data(), da_o.data()};
      for (std::size_t gi = 0; gi < kGates; ++gi) {
        const double* da = das[gi];
        const std::size_t goff =
            net.layer_range(l).first + gi * gate_block(units, in);
        for (std::size_t r = 0; r < units; ++r) {
          const double d = da[r];
          if (d == 0.0) continue;
          double* gw = grad.data() + goff + r * in;
          for (std::size_t j = 0; j < in; ++j) gw[j] += d * cc.x[j];
          double* gu = grad.data() + goff + units * in + r * units;
          for (std::size_t j = 0; j < units; ++j) gu[j] += d * cc.h_prev[j];
          grad[goff + units * in + units * units + r] += d;
        }
        // dx and dh_prev use the transposed weight blocks.
        const GateConstView gv = net.gate(l, static_cast<Gate>(gi));
        if (l > 0) {
          for (std::size_t r = 0; r < units; ++r) {
            const double d = da[r];
            if (d == 0.0) continue;
            const double* wr = gv.w.data() + r * in;
            for (std::size_t j = 0; j < in; ++j) d_above[l - 1][j] += wr[j] * d;
          }
        }
        for (std::size_t r = 0; r < units; ++r) {
          const double d = da[r];
          if (d == 0.0) continue;
          const double* ur = gv.u.data() + r * units;
          for (std::size_t j = 0; j < units; ++j) dh_next[l][j] += ur[j] * d;
        }
      }
    }
  }
}

}  // namespace

std::vector<double> backward(const Network& net, const ForwardCaches& caches,
                             const Tensor& labels) {
  if (labels.rank() != 3) throw DimensionError("labels must be (batch, time, channels)");
  if (labels.dim(0) != caches.batch || labels.dim(1) != caches.time)
    throw DimensionError("labels do not match the cached forward pass");
  if (labels.dim(2) != net.out_dim())
    throw DimensionError("labels channel count does not match the network output width");
  if (caches.batch == 0 || caches.time == 0) throw DimensionError("empty forward caches");
  if (caches.params_stamp != fnv1a(net.params()))
    throw ParameterError("forward caches are stale for this network");

  const std::size_t batch = caches.batch;
  std::vector<std::vector<double>> partial(batch);

#pragma omp parallel for schedule(static)
  for (long long sq = 0; sq < static_cast<long long>(batch); ++sq) {
    const auto s = static_cast<std::size_t>(sq);
    partial[s].assign(net.parameter_count(), 0.0);
    backward_sequence(net, caches, labels, s, partial[s]);
  }

  std::vector<double> grad(net.parameter_count(), 0.0);
  for (std::size_t s = 0; s < batch; ++s)
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += partial[s][i];
  return grad;
}

AdamState AdamState::init(const Network& net, const AdamConfig& cfg) {
  AdamState st;
  st.m.assign(net.parameter_count(), 0.0);
  st.v.assign(net.parameter_count(), 0.0);
  st.t = 0;
  st.cfg = cfg;
  return st;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const TrainMask* mask) {
  if (params.size() != grads.size() || params.size() != state.m.size() ||
      params.size() != state.v.size())
    throw DimensionError("optimizer state does not match the parameter vector");
  if (mask && mask->trainable.size() != params.size())
    throw DimensionError("mask does not match the parameter vector");

  state.t += 1;
  const AdamConfig& c = state.cfg;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (mask && !mask->trainable[i]) continue;
    const double g = grads[i];
    state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * g;
    state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * g * g;
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= c.alpha * mhat / (std::sqrt(vhat) + c.eps);
  }
}

namespace {
constexpr char kCkptMagic[4] = {'S', 'I', 'D', 'M'};
constexpr std::uint16_t kCkptVersion = 1;
}  // namespace

void save_checkpoint(const Network& net, const std::filesystem::path& path,
                     const json& provenance) {
  json header{{"lstm_sizes", net.lstm_sizes()},
              {"in_dim", net.in_dim()},
              {"out_dim", net.out_dim()},
              {"provenance", provenance}};
  const std::string htext = header.dump();

  std::string buf;
  buf.reserve(4 + 2 + 4 + htext.size() + net.parameter_count() * sizeof(double));
  buf.append(kCkptMagic, 4);
  detail::put_u16(buf, kCkptVersion);
  detail::put_u32(buf, static_cast<std::uint32_t>(htext.size()));
  buf += htext;
  detail::put_doubles(buf, net.params());
  detail::write_file(path, buf);
}

Network load_checkpoint(const std::filesystem::path& path, json* header_out) {
  detail::Reader r(path);
  r.expect_magic(kCkptMagic);
  if (const auto v = r.u16("version"); v != kCkptVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(v), r.off - 2);
  const auto hlen = r.u32("header length");
  const std::string htext = r.bytes(hlen, "header");

  json header;
  try {
    header = json::parse(htext);
  } catch (const json::exception& e) {
    throw IoError(std::string("bad header: ") + e.what(), r.off - hlen);
  }

  std::vector<std::size_t> sizes;
  std::size_t in_dim = 0, out_dim = 0;
  try {
    sizes = header.at("lstm_sizes").get<std::vector<std::size_t>>();
    in_dim = header.at("in_dim").get<std::size_t>();
    out_dim = header.at("out_dim").get<std::size_t>();
  } catch (const json::exception& e) {
    throw IoError(std::string("bad header: ") + e.what(), r.off - hlen);
  }

  Network net(sizes, in_dim, out_dim);
  r.doubles(net.params(), "parameters");
  r.expect_eof();
  if (header_out) *header_out = std::move(header);
  return net;
}

}  // namespace sysid::nn
