#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tc4tl/detail/text.hpp"
#include "tc4tl/error.hpp"
#include "tc4tl/random.hpp"

namespace tc4tl {

inline constexpr std::array<double, 4> kClassLabels = {1.2, 1.8, 3.0, 4.5};

enum class LossKind { MseSoftmax, CrossEntropy };

struct AdamConfig {
  double step = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  int epochs = 4;
  int batch_size = 128;
  AdamConfig adam;
  LossKind loss = LossKind::MseSoftmax;
  double validation_fraction = 0.10;
  std::uint64_t seed = 1;
};

// Dense layer, weights row-major by output unit: weights[o * in + i].
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;
  std::vector<double> bias;
};

struct MlpModel {
  std::vector<DenseLayer> layers;  // hidden layers then output layer
  std::array<double, 4> class_labels = kClassLabels;
  TrainConfig config;

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().in; }
  std::size_t output_dim() const {
    return layers.empty() ? 0 : layers.back().out;
  }
};

// Fan-in-scaled uniform init keeps ReLU pre-activations near unit scale.
inline MlpModel make_mlp(std::size_t input_dim,
                         const std::vector<std::size_t>& hidden,
                         std::size_t classes, std::uint64_t seed) {
  MlpModel model;
  Rng rng = Rng::for_stream(seed, 0);
  std::size_t prev = input_dim;
  std::vector<std::size_t> widths = hidden;
  widths.push_back(classes);
  for (std::size_t width : widths) {
    DenseLayer layer;
    layer.in = prev;
    layer.out = width;
    layer.weights.resize(layer.in * layer.out);
    layer.bias.assign(layer.out, 0.0);
    double scale = 1.0 / std::sqrt(static_cast<double>(layer.in));
    for (auto& w : layer.weights) w = rng.uniform(-scale, scale);
    prev = width;
    model.layers.push_back(std::move(layer));
  }
  return model;
}

namespace detail {

inline void softmax_in_place(std::vector<double>& z) {
  double max = z[0];
  for (double v : z) max = std::max(max, v);
  double sum = 0.0;
  for (auto& v : z) {
    v = std::exp(v - max);
    sum += v;
  }
  for (auto& v : z) v /= sum;
}

}  // namespace detail

// Forward pass retaining every layer's post-activation output (index 0 is
// the input itself), as needed for backpropagation.
inline std::vector<std::vector<double>> forward_trace(
    const MlpModel& model, std::span<const double> x) {
  if (x.size() != model.input_dim())
    raise(Errc::ShapeMismatch,
          "input has " + detail::format_int(static_cast<long long>(x.size())) +
              " features, model expects " +
              detail::format_int(static_cast<long long>(model.input_dim())));
  std::vector<std::vector<double>> trace;
  trace.emplace_back(x.begin(), x.end());
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& layer = model.layers[l];
    const auto& input = trace.back();
    std::vector<double> z(layer.out);
    for (std::size_t o = 0; o < layer.out; ++o) {
      double acc = layer.bias[o];
      const double* row = layer.weights.data() + o * layer.in;
      for (std::size_t i = 0; i < layer.in; ++i) acc += row[i] * input[i];
      z[o] = acc;
    }
    if (l + 1 < model.layers.size()) {
      for (auto& v : z) v = std::max(0.0, v);
    } else {
      detail::softmax_in_place(z);
    }
    trace.push_back(std::move(z));
  }
  return trace;
}

inline std::vector<double> forward(const MlpModel& model,
                                   std::span<const double> x) {
  return forward_trace(model, x).back();
}

// ---------------------------------------------------------------------------
// Loss and gradients

struct MlpGradients {
  std::vector<std::vector<double>> weights;  // per layer, same layout
  std::vector<std::vector<double>> bias;
};

inline MlpGradients zero_gradients(const MlpModel& model) {
  MlpGradients grads;
  for (const auto& layer : model.layers) {
    grads.weights.emplace_back(layer.weights.size(), 0.0);
    grads.bias.emplace_back(layer.bias.size(), 0.0);
  }
  return grads;
}

// MSE loss averages the squared output error over every output element of
// the batch; cross-entropy averages the negative log-likelihood over rows.
inline double mlp_batch_loss(const MlpModel& model,
                             const std::vector<std::vector<double>>& rows,
                             const std::vector<std::size_t>& targets,
                             LossKind loss) {
  if (rows.empty()) raise(Errc::EmptyTrainingSet, "loss over empty batch");
  double total = 0.0;
  std::size_t classes = model.output_dim();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto probs = forward(model, rows[r]);
    if (loss == LossKind::MseSoftmax) {
      for (std::size_t k = 0; k < classes; ++k) {
        double target = k == targets[r] ? 1.0 : 0.0;
        double diff = probs[k] - target;
        total += diff * diff;
      }
    } else {
      total += -std::log(std::max(probs[targets[r]], 1e-300));
    }
  }
  double denom = loss == LossKind::MseSoftmax
                     ? static_cast<double>(rows.size() * classes)
                     : static_cast<double>(rows.size());
  return total / denom;
}

// Analytic batch gradients, exposed so finite differences can check them.
inline MlpGradients mlp_batch_gradients(
    const MlpModel& model, const std::vector<std::vector<double>>& rows,
    const std::vector<std::size_t>& targets, LossKind loss) {
  if (rows.empty()) raise(Errc::EmptyTrainingSet, "gradients of empty batch");
  MlpGradients grads = zero_gradients(model);
  std::size_t classes = model.output_dim();
  std::size_t n_layers = model.layers.size();

  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto trace = forward_trace(model, rows[r]);
    const auto& probs = trace.back();

    // Delta at the output pre-activation (logits).
    std::vector<double> delta(classes);
    if (loss == LossKind::MseSoftmax) {
      // dL/dp, then through the softmax Jacobian p_k (δ_kj − p_j).
      std::vector<double> dp(classes);
      double scale = 2.0 / static_cast<double>(rows.size() * classes);
      for (std::size_t k = 0; k < classes; ++k) {
        double target = k == targets[r] ? 1.0 : 0.0;
        dp[k] = scale * (probs[k] - target);
      }
      double dot = 0.0;
      for (std::size_t k = 0; k < classes; ++k) dot += dp[k] * probs[k];
      for (std::size_t j = 0; j < classes; ++j)
        delta[j] = probs[j] * (dp[j] - dot);
    } else {
      double scale = 1.0 / static_cast<double>(rows.size());
      for (std::size_t j = 0; j < classes; ++j) {
        double target = j == targets[r] ? 1.0 : 0.0;
        delta[j] = scale * (probs[j] - target);
      }
    }

    for (std::size_t l = n_layers; l-- > 0;) {
      const auto& layer = model.layers[l];
      const auto& input = trace[l];
      auto& dw = grads.weights[l];
      auto& db = grads.bias[l];
      for (std::size_t o = 0; o < layer.out; ++o) {
        db[o] += delta[o];
        double d = delta[o];
        double* dst = dw.data() + o * layer.in;
        for (std::size_t i = 0; i < layer.in; ++i) dst[i] += d * input[i];
      }
      if (l == 0) break;
      std::vector<double> prev_delta(layer.in, 0.0);
      for (std::size_t o = 0; o < layer.out; ++o) {
        double d = delta[o];
        const double* row = layer.weights.data() + o * layer.in;
        for (std::size_t i = 0; i < layer.in; ++i)
          prev_delta[i] += d * row[i];
      }
      // ReLU gate on the previous layer's activation.
      for (std::size_t i = 0; i < layer.in; ++i) {
        if (trace[l][i] <= 0.0) prev_delta[i] = 0.0;
      }
      delta = std::move(prev_delta);
    }
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Training

struct EpochStats {
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct MlpTrainResult {
  MlpModel model;
  std::vector<EpochStats> log;
  std::size_t n_train = 0;
  std::size_t n_val = 0;
};

namespace detail {

struct AdamState {
  std::vector<std::vector<double>> m_w, v_w, m_b, v_b;
  long long t = 0;

  explicit AdamState(const MlpModel& model) {
    for (const auto& layer : model.layers) {
      m_w.emplace_back(layer.weights.size(), 0.0);
      v_w.emplace_back(layer.weights.size(), 0.0);
      m_b.emplace_back(layer.bias.size(), 0.0);
      v_b.emplace_back(layer.bias.size(), 0.0);
    }
  }

  void apply(MlpModel& model, const MlpGradients& grads,
             const AdamConfig& adam) {
    ++t;
    double bc1 = 1.0 - std::pow(adam.beta1, static_cast<double>(t));
    double bc2 = 1.0 - std::pow(adam.beta2, static_cast<double>(t));
    auto update = [&](std::vector<double>& params, std::vector<double>& m,
                      std::vector<double>& v, const std::vector<double>& g) {
      for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = adam.beta1 * m[i] + (1.0 - adam.beta1) * g[i];
        v[i] = adam.beta2 * v[i] + (1.0 - adam.beta2) * g[i] * g[i];
        double m_hat = m[i] / bc1;
        double v_hat = v[i] / bc2;
        params[i] -= adam.step * m_hat / (std::sqrt(v_hat) + adam.epsilon);
      }
    };
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
      update(model.layers[l].weights, m_w[l], v_w[l], grads.weights[l]);
      update(model.layers[l].bias, m_b[l], v_b[l], grads.bias[l]);
    }
  }
};

}  // namespace detail

// Deterministic training: weight init, row shuffle, and batch partition all
// derive from config.seed. The returned model is the last-epoch state.
inline MlpTrainResult train_mlp(const std::vector<std::vector<double>>& rows,
                                const std::vector<double>& labels,
                                const TrainConfig& config = {},
                                const std::vector<std::size_t>& hidden_widths =
                                    {128, 128, 128}) {
  if (rows.empty()) raise(Errc::EmptyTrainingSet, "no training rows");
  if (rows.size() != labels.size())
    raise(Errc::ShapeMismatch, "rows and labels differ in length");
  if (!(config.validation_fraction >= 0.0 &&
        config.validation_fraction < 1.0))
    raise(Errc::InvalidDataset, "validation_fraction must lie in [0,1)");

  std::vector<std::size_t> targets(labels.size());
  for (std::size_t r = 0; r < labels.size(); ++r) {
    bool found = false;
    for (std::size_t k = 0; k < kClassLabels.size(); ++k) {
      if (labels[r] == kClassLabels[k]) {
        targets[r] = k;
        found = true;
      }
    }
    if (!found)
      raise(Errc::InvalidDataset,
            "label " + detail::format_double(labels[r]) +
                " is not one of the class labels");
  }

  MlpTrainResult result;
  result.model =
      make_mlp(rows[0].size(), hidden_widths, kClassLabels.size(), config.seed);
  result.model.config = config;

  Rng shuffle_rng = Rng::for_stream(config.seed, 1);
  std::vector<std::size_t> order(rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  shuffle_rng.shuffle(order);

  std::size_t n_val = static_cast<std::size_t>(std::llround(
      config.validation_fraction * static_cast<double>(rows.size())));
  if (n_val >= rows.size()) n_val = rows.size() - 1;
  std::size_t n_train = rows.size() - n_val;
  std::vector<std::size_t> train_idx(order.begin(), order.begin() + n_train);
  std::vector<std::size_t> val_idx(order.begin() + n_train, order.end());
  result.n_train = n_train;
  result.n_val = n_val;

  auto subset_loss = [&](const std::vector<std::size_t>& idx) {
    if (idx.empty()) return 0.0;
    std::vector<std::vector<double>> x;
    std::vector<std::size_t> y;
    for (auto i : idx) {
      x.push_back(rows[i]);
      y.push_back(targets[i]);
    }
    return mlp_batch_loss(result.model, x, y, config.loss);
  };

  detail::AdamState adam(result.model);
  std::size_t batch_size =
      config.batch_size < 1 ? 1 : static_cast<std::size_t>(config.batch_size);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(train_idx);
    for (std::size_t start = 0; start < train_idx.size();
         start += batch_size) {
      std::size_t end = std::min(start + batch_size, train_idx.size());
      std::vector<std::vector<double>> x;
      std::vector<std::size_t> y;
      for (std::size_t i = start; i < end; ++i) {
        x.push_back(rows[train_idx[i]]);
        y.push_back(targets[train_idx[i]]);
      }
      auto grads =
          mlp_batch_gradients(result.model, x, y, config.loss);
      adam.apply(result.model, grads, config.adam);
    }
    EpochStats stats;
    stats.train_loss = subset_loss(train_idx);
    stats.val_loss = subset_loss(val_idx);
    if (!std::isfinite(stats.train_loss) || !std::isfinite(stats.val_loss))
      raise(Errc::NonFiniteLoss,
            "loss diverged at epoch " + detail::format_int(epoch + 1));
    result.log.push_back(stats);
  }
  return result;
}

// Argmax over class probabilities; ties go to the larger distance.
inline double predict_mlp(const MlpModel& model, std::span<const double> x) {
  auto probs = forward(model, x);
  std::size_t best = 0;
  for (std::size_t k = 1; k < probs.size(); ++k) {
    if (probs[k] >= probs[best]) best = k;
  }
  return model.class_labels[best];
}

// ---------------------------------------------------------------------------
// Serialization

inline std::string write_mlp(const MlpModel& model) {
  std::string out = "mlp\n";
  out += "loss=";
  out += model.config.loss == LossKind::MseSoftmax ? "mse" : "ce";
  out += "\nclass_labels=";
  for (std::size_t k = 0; k < model.class_labels.size(); ++k) {
    if (k) out += ',';
    out += detail::format_double(model.class_labels[k]);
  }
  out += "\nlayers=" +
         detail::format_int(static_cast<long long>(model.layers.size())) +
         "\n";
  for (const auto& layer : model.layers) {
    out += "layer " + detail::format_int(static_cast<long long>(layer.in)) +
           " " + detail::format_int(static_cast<long long>(layer.out)) + "\n";
    out += "bias";
    for (double b : layer.bias) {
      out += ' ';
      out += detail::format_double(b);
    }
    out += "\nweights";
    for (double w : layer.weights) {
      out += ' ';
      out += detail::format_double(w);
    }
    out += '\n';
  }
  return out;
}

inline MlpModel parse_mlp(std::string_view content) {
  auto lines = detail::split(content, '\n');
  std::size_t cursor = 0;
  auto next_line = [&]() -> std::string_view {
    while (cursor < lines.size()) {
      std::string_view line = lines[cursor++];
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (!line.empty()) return line;
    }
    raise(Errc::MalformedLine, "truncated model text");
  };

  if (next_line() != "mlp")
    raise(Errc::MalformedLine, "not an mlp model");
  MlpModel model;
  std::string_view loss_line = next_line();
  if (loss_line == "loss=mse") {
    model.config.loss = LossKind::MseSoftmax;
  } else if (loss_line == "loss=ce") {
    model.config.loss = LossKind::CrossEntropy;
  } else {
    raise(Errc::MalformedLine, "bad loss line");
  }
  std::string_view labels_line = next_line();
  if (!labels_line.starts_with("class_labels="))
    raise(Errc::MalformedLine, "missing class_labels");
  auto label_fields = detail::split(labels_line.substr(13), ',');
  if (label_fields.size() != model.class_labels.size())
    raise(Errc::MalformedLine, "expected 4 class labels");
  for (std::size_t k = 0; k < label_fields.size(); ++k) {
    auto value = detail::parse_double(label_fields[k]);
    if (!value) raise(Errc::MalformedLine, "bad class label");
    model.class_labels[k] = *value;
  }
  std::string_view layers_line = next_line();
  if (!layers_line.starts_with("layers="))
    raise(Errc::MalformedLine, "missing layer count");
  auto n_layers = detail::parse_int(layers_line.substr(7));
  if (!n_layers || *n_layers < 1)
    raise(Errc::MalformedLine, "bad layer count");

  auto parse_values = [&](std::string_view line, std::string_view head,
                          std::size_t expected) {
    auto fields = detail::split(line, ' ');
    if (fields.empty() || fields[0] != head || fields.size() - 1 != expected)
      raise(Errc::MalformedLine,
            "expected " + std::string(head) + " with " +
                detail::format_int(static_cast<long long>(expected)) +
                " values");
    std::vector<double> values;
    values.reserve(expected);
    for (std::size_t i = 1; i < fields.size(); ++i) {
      auto value = detail::parse_double(fields[i]);
      if (!value) raise(Errc::MalformedLine, "bad numeric value");
      values.push_back(*value);
    }
    return values;
  };

  for (long long l = 0; l < *n_layers; ++l) {
    std::string_view header = next_line();
    auto fields = detail::split(header, ' ');
    if (fields.size() != 3 || fields[0] != "layer")
      raise(Errc::MalformedLine, "bad layer header");
    auto in = detail::parse_int(fields[1]);
    auto out = detail::parse_int(fields[2]);
    if (!in || !out || *in < 1 || *out < 1)
      raise(Errc::MalformedLine, "bad layer shape");
    DenseLayer layer;
    layer.in = static_cast<std::size_t>(*in);
    layer.out = static_cast<std::size_t>(*out);
    layer.bias = parse_values(next_line(), "bias", layer.out);
    layer.weights = parse_values(next_line(), "weights", layer.in * layer.out);
    model.layers.push_back(std::move(layer));
  }
  return model;
}

}  // namespace tc4tl
