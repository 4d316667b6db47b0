// Copyright 2026 The plantmon Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "plantmon/anomaly.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "plantmon/parallel.hpp"
#include "plantmon/random.hpp"

namespace plantmon::anomaly {
namespace {

using nlohmann::json;

std::vector<std::size_t> layer_widths(std::size_t input_dim) {
  return {input_dim, kHiddenWidths[0], kHiddenWidths[1], kHiddenWidths[2],
          input_dim};
}

void affine(const DenseLayer& layer, std::span<const double> in,
            std::span<double> out) {
  for (std::size_t o = 0; o < layer.outputs; ++o) {
    const double* w = layer.weights.data() + o * layer.inputs;
    double acc = layer.bias[o];
    for (std::size_t i = 0; i < layer.inputs; ++i) acc += w[i] * in[i];
    out[o] = acc;
  }
}

// Activations of one forward pass; z[l] pre-activation, a[l] post.
struct Trace {
  std::vector<std::vector<double>> z;
  std::vector<std::vector<double>> a;
};

void forward(const std::vector<DenseLayer>& layers, std::span<const double> x,
             Trace& trace) {
  const std::size_t n = layers.size();
  trace.z.resize(n);
  trace.a.resize(n + 1);
  trace.a[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < n; ++l) {
    trace.z[l].resize(layers[l].outputs);
    affine(layers[l], trace.a[l], trace.z[l]);
    trace.a[l + 1] = trace.z[l];
    if (l + 1 < n) {
      for (double& v : trace.a[l + 1]) v = std::max(v, 0.0);
    }
  }
}

double squared_residual_mean(std::span<const double> out,
                             std::span<const double> x) {
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = out[i] - x[i];
    ss += d * d;
  }
  return ss / static_cast<double>(x.size());
}

void check_batch(const std::vector<Segment>& batch, std::size_t dim) {
  if (batch.empty()) throw ConfigError("empty batch");
  for (const auto& s : batch) {
    if (s.size() != dim) {
      throw ConfigError("segment length " + std::to_string(s.size()) +
                        " does not match model input " + std::to_string(dim));
    }
  }
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

AeModel AeModel::initialize(std::size_t input_dim, std::uint64_t seed) {
  if (input_dim == 0) throw ConfigError("autoencoder input dimension is zero");
  const auto widths = layer_widths(input_dim);
  Rng rng(seed);
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    DenseLayer layer;
    layer.inputs = widths[l];
    layer.outputs = widths[l + 1];
    const double limit =
        std::sqrt(6.0 / static_cast<double>(layer.inputs + layer.outputs));
    layer.weights.resize(layer.inputs * layer.outputs);
    for (double& w : layer.weights) w = rng.uniform(-limit, limit);
    layer.bias.assign(layer.outputs, 0.0);
    layers.push_back(std::move(layer));
  }
  return AeModel(std::move(layers));
}

AeModel AeModel::from_layers(std::vector<DenseLayer> layers) {
  if (layers.size() != 4 || layers.front().inputs == 0) {
    throw DataError("autoencoder must have four dense layers");
  }
  const auto widths = layer_widths(layers.front().inputs);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& layer = layers[l];
    if (layer.inputs != widths[l] || layer.outputs != widths[l + 1] ||
        layer.weights.size() != layer.inputs * layer.outputs ||
        layer.bias.size() != layer.outputs) {
      throw DataError("autoencoder layer " + std::to_string(l) +
                      " has inconsistent shape");
    }
    for (const auto* v : {&layer.weights, &layer.bias}) {
      for (double x : *v) {
        if (!std::isfinite(x)) throw DataError("non-finite model parameter");
      }
    }
  }
  return AeModel(std::move(layers));
}

Segment AeModel::reconstruct(std::span<const double> x) const {
  if (x.size() != input_dim()) {
    throw ConfigError("segment length " + std::to_string(x.size()) +
                      " does not match model input " +
                      std::to_string(input_dim()));
  }
  Trace trace;
  forward(layers_, x, trace);
  return trace.a.back();
}

double AeModel::reconstruction_error(std::span<const double> x) const {
  return squared_residual_mean(reconstruct(x), x);
}

double AeModel::loss(const std::vector<Segment>& batch) const {
  check_batch(batch, input_dim());
  double sum = 0.0;
  for (const auto& s : batch) sum += reconstruction_error(s);
  return sum / static_cast<double>(batch.size());
}

double AeModel::loss_and_gradient(const std::vector<Segment>& batch,
                                  std::vector<double>& grad) const {
  check_batch(batch, input_dim());
  grad.assign(parameter_count(), 0.0);
  std::vector<std::size_t> offsets;
  {
    std::size_t off = 0;
    for (const auto& layer : layers_) {
      offsets.push_back(off);
      off += layer.weights.size() + layer.bias.size();
    }
  }
  const double dim = static_cast<double>(input_dim());
  const double n = static_cast<double>(batch.size());
  Trace trace;
  std::vector<double> delta;
  std::vector<double> upstream;
  double total = 0.0;
  for (const auto& x : batch) {
    forward(layers_, x, trace);
    const auto& out = trace.a.back();
    total += squared_residual_mean(out, x);
    delta.resize(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      delta[i] = 2.0 * (out[i] - x[i]) / (dim * n);
    }
    for (std::size_t l = layers_.size(); l-- > 0;) {
      const auto& layer = layers_[l];
      const auto& input = trace.a[l];
      double* gw = grad.data() + offsets[l];
      double* gb = gw + layer.weights.size();
      for (std::size_t o = 0; o < layer.outputs; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        double* row = gw + o * layer.inputs;
        for (std::size_t i = 0; i < layer.inputs; ++i) row[i] += d * input[i];
        gb[o] += d;
      }
      if (l == 0) break;
      upstream.assign(layer.inputs, 0.0);
      for (std::size_t o = 0; o < layer.outputs; ++o) {
        const double d = delta[o];
        if (d == 0.0) continue;
        const double* w = layer.weights.data() + o * layer.inputs;
        for (std::size_t i = 0; i < layer.inputs; ++i) upstream[i] += w[i] * d;
      }
      const auto& z_prev = trace.z[l - 1];
      for (std::size_t i = 0; i < upstream.size(); ++i) {
        if (z_prev[i] <= 0.0) upstream[i] = 0.0;
      }
      delta.swap(upstream);
    }
  }
  return total / n;
}

std::size_t AeModel::parameter_count() const {
  std::size_t count = 0;
  for (const auto& layer : layers_) count += layer.weights.size() + layer.bias.size();
  return count;
}

std::vector<double> AeModel::parameters() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const auto& layer : layers_) {
    out.insert(out.end(), layer.weights.begin(), layer.weights.end());
    out.insert(out.end(), layer.bias.begin(), layer.bias.end());
  }
  return out;
}

void AeModel::set_parameters(std::span<const double> params) {
  if (params.size() != parameter_count()) {
    throw ConfigError("parameter vector has the wrong size");
  }
  std::size_t off = 0;
  for (auto& layer : layers_) {
    std::copy_n(params.begin() + static_cast<std::ptrdiff_t>(off),
                layer.weights.size(), layer.weights.begin());
    off += layer.weights.size();
    std::copy_n(params.begin() + static_cast<std::ptrdiff_t>(off),
                layer.bias.size(), layer.bias.begin());
    off += layer.bias.size();
  }
}

MinMaxScaler MinMaxScaler::fit(const std::vector<Segment>& segments) {
  if (segments.empty()) throw ConfigError("cannot fit scaler on no segments");
  const std::size_t dim = segments.front().size();
  MinMaxScaler s;
  s.min.assign(dim, INFINITY);
  std::vector<double> max(dim, -INFINITY);
  for (const auto& seg : segments) {
    for (std::size_t i = 0; i < dim; ++i) {
      s.min[i] = std::min(s.min[i], seg[i]);
      max[i] = std::max(max[i], seg[i]);
    }
  }
  s.range.resize(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    const double r = max[i] - s.min[i];
    s.range[i] = r > 0.0 ? r : 1.0;
  }
  return s;
}

Segment MinMaxScaler::transform(std::span<const double> x, bool clamp) const {
  if (x.size() != min.size()) {
    throw ConfigError("segment length " + std::to_string(x.size()) +
                      " does not match scaler " + std::to_string(min.size()));
  }
  Segment out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = (x[i] - min[i]) / range[i];
    if (clamp) out[i] = std::clamp(out[i], kScaledClampLow, kScaledClampHigh);
  }
  return out;
}

void validate(const AeTrainConfig& c) {
  if (c.epochs < 1) throw ConfigError("ae epochs must be >= 1");
  if (!(c.learning_rate > 0)) throw ConfigError("ae learning_rate must be > 0");
  if (!(c.beta1 >= 0 && c.beta1 < 1) || !(c.beta2 >= 0 && c.beta2 < 1)) {
    throw ConfigError("ae moment decays must be in [0, 1)");
  }
  if (!(c.epsilon > 0)) throw ConfigError("ae epsilon must be > 0");
  if (c.max_train_segments < 2) {
    throw ConfigError("ae max_train_segments must be >= 2");
  }
}

DetectorState train_detector(const std::vector<Segment>& healthy,
                             const AeTrainConfig& config) {
  validate(config);
  if (healthy.size() < 2) {
    throw ConfigError("autoencoder training needs at least 2 segments, got " +
                      std::to_string(healthy.size()));
  }
  const std::size_t dim = healthy.front().size();
  for (const auto& s : healthy) {
    if (s.size() != dim) throw ConfigError("training segments differ in length");
  }
  const std::size_t n_train = std::min(healthy.size(), config.max_train_segments);
  const std::vector<Segment> raw(healthy.begin(),
                                 healthy.begin() + static_cast<std::ptrdiff_t>(n_train));

  DetectorState state;
  state.config = config;
  state.train_segments = n_train;
  state.scaler = MinMaxScaler::fit(raw);
  std::vector<Segment> batch;
  batch.reserve(raw.size());
  for (const auto& s : raw) batch.push_back(state.scaler.transform(s, false));

  state.model = AeModel::initialize(dim, config.seed);
  std::vector<double> params = state.model.parameters();
  std::vector<double> m(params.size(), 0.0);
  std::vector<double> v(params.size(), 0.0);
  std::vector<double> grad;
  double decay1 = 1.0;
  double decay2 = 1.0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double loss = state.model.loss_and_gradient(batch, grad);
    if (!std::isfinite(loss)) {
      throw Error("autoencoder loss became non-finite at epoch " +
                  std::to_string(epoch));
    }
    state.loss_history.push_back(loss);
    decay1 *= config.beta1;
    decay2 *= config.beta2;
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * grad[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
      const double m_hat = m[i] / (1.0 - decay1);
      const double v_hat = v[i] / (1.0 - decay2);
      params[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
    state.model.set_parameters(params);
  }
  state.final_train_error = state.loss_history.back();
  state.threshold = threshold_from_training_error(state.final_train_error);
  state.degenerate = !(state.threshold > 1e-12);
  return state;
}

DetectionOutcome detect(const DetectorState& state,
                        std::span<const double> segment) {
  if (segment.size() != state.model.input_dim()) {
    throw ConfigError("segment length " + std::to_string(segment.size()) +
                      " does not match detector input " +
                      std::to_string(state.model.input_dim()));
  }
  const Segment scaled = state.scaler.transform(segment, true);
  DetectionOutcome out;
  out.error = state.model.reconstruction_error(scaled);
  out.anomalous = out.error > state.threshold;
  return out;
}

namespace {

double flagged_fraction(const DetectorState& state,
                        const std::vector<Segment>& segments) {
  std::size_t flagged = 0;
  for (const auto& s : segments) flagged += detect(state, s).anomalous ? 1 : 0;
  return static_cast<double>(flagged) / static_cast<double>(segments.size());
}

}  // namespace

double net_detection(const DetectorState& state,
                     const std::vector<Segment>& healthy,
                     const std::vector<Segment>& anomalous) {
  if (healthy.empty() || anomalous.empty()) {
    throw DataError("net detection needs non-empty healthy and anomalous sets");
  }
  return flagged_fraction(state, anomalous) - flagged_fraction(state, healthy);
}

void save_detector(const DetectorState& state, const std::filesystem::path& path) {
  json doc;
  doc["format"] = "plantmon.autoencoder/1";
  doc["input_dim"] = state.model.input_dim();
  doc["layer_widths"] = layer_widths(state.model.input_dim());
  doc["activation"] = {{"hidden", "relu"}, {"output", "identity"}};
  json layers = json::array();
  for (const auto& layer : state.model.layers()) {
    layers.push_back({{"inputs", layer.inputs},
                      {"outputs", layer.outputs},
                      {"weights", layer.weights},
                      {"bias", layer.bias}});
  }
  doc["layers"] = layers;
  doc["scaler"] = {{"min", state.scaler.min}, {"range", state.scaler.range}};
  doc["threshold"] = state.threshold;
  doc["final_train_error"] = state.final_train_error;
  doc["train_segments"] = state.train_segments;
  doc["degenerate"] = state.degenerate;
  doc["loss_history"] = state.loss_history;
  const auto& c = state.config;
  doc["config"] = {{"epochs", c.epochs},
                   {"learning_rate", c.learning_rate},
                   {"beta1", c.beta1},
                   {"beta2", c.beta2},
                   {"epsilon", c.epsilon},
                   {"max_train_segments", c.max_train_segments},
                   {"optimizer", "adam"},
                   {"batch", "full"}};
  doc["seed"] = c.seed;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << doc.dump(1) << '\n';
}

DetectorState load_detector(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    const json doc = json::parse(in);
    std::vector<DenseLayer> layers;
    for (const auto& l : doc.at("layers")) {
      DenseLayer layer;
      layer.inputs = l.at("inputs").get<std::size_t>();
      layer.outputs = l.at("outputs").get<std::size_t>();
      layer.weights = l.at("weights").get<std::vector<double>>();
      layer.bias = l.at("bias").get<std::vector<double>>();
      layers.push_back(std::move(layer));
    }
    DetectorState state;
    state.model = AeModel::from_layers(std::move(layers));
    state.scaler.min = doc.at("scaler").at("min").get<std::vector<double>>();
    state.scaler.range = doc.at("scaler").at("range").get<std::vector<double>>();
    if (state.scaler.min.size() != state.model.input_dim() ||
        state.scaler.range.size() != state.model.input_dim()) {
      throw DataError("scaler does not match model input");
    }
    state.threshold = doc.at("threshold").get<double>();
    state.final_train_error = doc.at("final_train_error").get<double>();
    state.train_segments = doc.at("train_segments").get<std::size_t>();
    state.degenerate = doc.at("degenerate").get<bool>();
    state.loss_history = doc.at("loss_history").get<std::vector<double>>();
    const auto& c = doc.at("config");
    state.config.epochs = c.at("epochs").get<int>();
    state.config.learning_rate = c.at("learning_rate").get<double>();
    state.config.beta1 = c.at("beta1").get<double>();
    state.config.beta2 = c.at("beta2").get<double>();
    state.config.epsilon = c.at("epsilon").get<double>();
    state.config.max_train_segments = c.at("max_train_segments").get<std::size_t>();
    state.config.seed = doc.at("seed").get<std::uint64_t>();
    return state;
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": malformed detector: " + e.what());
  }
}

std::vector<SweepCell> sweep(const std::vector<SweepSeries>& series,
                             std::span<const int> lengths,
                             const AeTrainConfig& config, std::size_t threads) {
  validate(config);
  for (int len : lengths) (void)dataset::WindowSpec::of_length(len);
  const std::size_t n_cells = series.size() * lengths.size();
  std::vector<std::array<SweepCell, 2>> out(n_cells);

  parallel_for(n_cells, threads, [&](std::size_t c) {
    const auto& s = series[c / lengths.size()];
    const int length = lengths[c % lengths.size()];
    const auto spec = dataset::WindowSpec::of_length(length);

    std::array<std::vector<Segment>, 3> by_treatment;
    for (const auto& t : s.trajectories) {
      if (dataset::covers(t, spec)) {
        by_treatment[index_of(t.treatment)].push_back(dataset::window(t, spec));
      }
    }
    auto& healthy = by_treatment[index_of(Treatment::T1)];
    const std::size_t n_train = std::min(healthy.size(), config.max_train_segments);
    if (healthy.size() <= n_train) {
      throw DataError(s.name + ", length " + std::to_string(length) +
                      ": no T1 segments remain for testing (" +
                      std::to_string(healthy.size()) + " available)");
    }
    AeTrainConfig cell_config = config;
    cell_config.seed = derive_seed(config.seed ^ fnv1a(s.name),
                                   static_cast<std::uint64_t>(length));
    const std::vector<Segment> train(
        healthy.begin(), healthy.begin() + static_cast<std::ptrdiff_t>(n_train));
    const std::vector<Segment> healthy_test(
        healthy.begin() + static_cast<std::ptrdiff_t>(n_train), healthy.end());
    const DetectorState state = train_detector(train, cell_config);
    const double false_rate = flagged_fraction(state, healthy_test);

    for (std::size_t k = 0; k < 2; ++k) {
      const Treatment target = k == 0 ? Treatment::T2 : Treatment::T3;
      const auto& anomalous = by_treatment[index_of(target)];
      if (anomalous.empty()) {
        throw DataError(s.name + ", length " + std::to_string(length) + ": no " +
                        std::string(to_string(target)) + " segments");
      }
      SweepCell& cell = out[c][k];
      cell.series = s.name;
      cell.length = length;
      cell.target = target;
      cell.true_rate = flagged_fraction(state, anomalous);
      cell.false_rate = false_rate;
      cell.net_detection = cell.true_rate - cell.false_rate;
      cell.threshold = state.threshold;
      cell.n_train = n_train;
      cell.n_healthy_test = healthy_test.size();
      cell.n_anomalous_test = anomalous.size();
    }
  });

  std::vector<SweepCell> cells;
  cells.reserve(2 * n_cells);
  for (auto& pair : out) {
    cells.push_back(std::move(pair[0]));
    cells.push_back(std::move(pair[1]));
  }
  return cells;
}

}  // namespace plantmon::anomaly
