#include "asknav/nnet.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include "asknav/error.hpp"
#include "asknav/rng.hpp"

namespace asknav {

namespace {

void require(bool ok, const char* message) {
  if (!ok) throw Error(ErrorCode::kShapeMismatch, message);
}

void require_same_shape(const MlpParams& a, const MlpParams& b) {
  require(a.layer_sizes == b.layer_sizes, "parameter shapes differ");
}

}  // namespace

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    n += weights[l].size() + biases[l].size();
  }
  return n;
}

void MlpParams::validate() const {
  require(layer_sizes.size() >= 2, "need at least one layer");
  require(weights.size() == layer_sizes.size() - 1, "weight count");
  require(biases.size() == layer_sizes.size() - 1, "bias count");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    require(layer_sizes[l] > 0 && layer_sizes[l + 1] > 0, "zero-width layer");
    require(weights[l].size() == layer_sizes[l] * layer_sizes[l + 1],
            "weight matrix shape");
    require(biases[l].size() == layer_sizes[l + 1], "bias vector shape");
  }
  require(all_finite(*this), "non-finite parameter");
}

MlpParams MlpParams::zeros(std::vector<std::size_t> layer_sizes) {
  MlpParams p;
  p.layer_sizes = std::move(layer_sizes);
  require(p.layer_sizes.size() >= 2, "need at least one layer");
  for (std::size_t l = 0; l + 1 < p.layer_sizes.size(); ++l) {
    p.weights.emplace_back(p.layer_sizes[l] * p.layer_sizes[l + 1], 0.0);
    p.biases.emplace_back(p.layer_sizes[l + 1], 0.0);
  }
  return p;
}

MlpParams init_mlp(std::vector<std::size_t> layer_sizes, std::uint64_t seed) {
  MlpParams p = MlpParams::zeros(std::move(layer_sizes));
  Rng rng(seed);
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    const double fan_in = static_cast<double>(p.layer_sizes[l]);
    const double fan_out = static_cast<double>(p.layer_sizes[l + 1]);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& w : p.weights[l]) w = uniform_range(rng, -limit, limit);
  }
  return p;
}

MlpOutput mlp_forward(const MlpParams& params, std::span<const double> input) {
  require(!params.layer_sizes.empty() && input.size() == params.input_size(),
          "input width does not match layer_sizes[0]");
  MlpOutput out;
  auto& acts = out.cache.activations;
  acts.reserve(params.num_layers() + 1);
  acts.emplace_back(input.begin(), input.end());
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    const std::size_t n_in = params.layer_sizes[l];
    const std::size_t n_out = params.layer_sizes[l + 1];
    const std::vector<double>& x = acts.back();
    std::vector<double> y(params.biases[l]);
    const double* w = params.weights[l].data();
    for (std::size_t o = 0; o < n_out; ++o) {
      const double* row = w + o * n_in;
      double sum = 0.0;
      for (std::size_t i = 0; i < n_in; ++i) sum += row[i] * x[i];
      y[o] += sum;
    }
    if (l + 1 < params.num_layers()) {
      for (double& v : y) v = std::tanh(v);
    }
    acts.push_back(std::move(y));
  }
  out.output = acts.back();
  return out;
}

std::vector<double> mlp_predict(const MlpParams& params,
                                std::span<const double> input) {
  return mlp_forward(params, input).output;
}

void mlp_backward_accumulate(const MlpParams& params, const MlpCache& cache,
                             std::span<const double> output_grad,
                             MlpParams& grads, std::vector<double>* input_grad) {
  const std::size_t layers = params.num_layers();
  require(cache.activations.size() == layers + 1, "cache does not match params");
  require(output_grad.size() == params.output_size(), "output_grad width");
  require_same_shape(params, grads);

  // delta holds dL/d(pre-activation) of the current layer.
  std::vector<double> delta(output_grad.begin(), output_grad.end());
  for (std::size_t l = layers; l-- > 0;) {
    const std::size_t n_in = params.layer_sizes[l];
    const std::size_t n_out = params.layer_sizes[l + 1];
    const std::vector<double>& x = cache.activations[l];
    require(x.size() == n_in, "cache activation width");
    double* gw = grads.weights[l].data();
    for (std::size_t o = 0; o < n_out; ++o) {
      const double d = delta[o];
      grads.biases[l][o] += d;
      if (d == 0.0) continue;
      double* row = gw + o * n_in;
      for (std::size_t i = 0; i < n_in; ++i) row[i] += d * x[i];
    }
    if (l == 0 && input_grad == nullptr) break;
    std::vector<double> prev(n_in, 0.0);
    const double* w = params.weights[l].data();
    for (std::size_t o = 0; o < n_out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const double* row = w + o * n_in;
      for (std::size_t i = 0; i < n_in; ++i) prev[i] += d * row[i];
    }
    if (l > 0) {
      // x is tanh output of the previous layer: d tanh = 1 - tanh^2.
      for (std::size_t i = 0; i < n_in; ++i) prev[i] *= 1.0 - x[i] * x[i];
    } else {
      *input_grad = std::move(prev);
      break;
    }
    delta = std::move(prev);
  }
}

MlpGradients mlp_backward(const MlpParams& params, const MlpCache& cache,
                          std::span<const double> output_grad) {
  MlpGradients g;
  g.params = MlpParams::zeros(params.layer_sizes);
  mlp_backward_accumulate(params, cache, output_grad, g.params, &g.input);
  return g;
}

std::vector<double> log_softmax(std::span<const double> logits) {
  require(!logits.empty(), "empty logits");
  const double max = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - max);
  const double log_norm = max + std::log(sum);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - log_norm;
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p = log_softmax(logits);
  for (double& v : p) v = std::exp(v);
  return p;
}

CrossEntropy softmax_cross_entropy(std::span<const double> logits,
                                   std::size_t label) {
  if (label >= logits.size()) {
    throw Error(ErrorCode::kLabelOutOfRange,
                "label " + std::to_string(label) + " >= " +
                    std::to_string(logits.size()));
  }
  const std::vector<double> logp = log_softmax(logits);
  CrossEntropy ce;
  ce.loss = -logp[label];
  ce.logits_grad.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    ce.logits_grad[i] = std::exp(logp[i]) - (i == label ? 1.0 : 0.0);
  }
  return ce;
}

OptState make_opt_state(const MlpParams& params, double learning_rate) {
  OptState s;
  s.first_moment = MlpParams::zeros(params.layer_sizes);
  s.second_moment = MlpParams::zeros(params.layer_sizes);
  s.learning_rate = learning_rate;
  return s;
}

void adam_step(MlpParams& params, const MlpParams& grads, OptState& opt) {
  require_same_shape(params, grads);
  require_same_shape(params, opt.first_moment);
  require_same_shape(params, opt.second_moment);
  ++opt.step;
  const double t = static_cast<double>(opt.step);
  const double c1 = 1.0 - std::pow(opt.beta1, t);
  const double c2 = 1.0 - std::pow(opt.beta2, t);
  auto update = [&](std::vector<double>& p, const std::vector<double>& g,
                    std::vector<double>& m, std::vector<double>& v) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g[i];
      v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= opt.learning_rate * m_hat / (std::sqrt(v_hat) + opt.epsilon);
    }
  };
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    update(params.weights[l], grads.weights[l], opt.first_moment.weights[l],
           opt.second_moment.weights[l]);
    update(params.biases[l], grads.biases[l], opt.first_moment.biases[l],
           opt.second_moment.biases[l]);
  }
}

double squared_norm(const MlpParams& p) {
  double s = 0.0;
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    for (double v : p.weights[l]) s += v * v;
    for (double v : p.biases[l]) s += v * v;
  }
  return s;
}

void scale_in_place(MlpParams& p, double factor) {
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    for (double& v : p.weights[l]) v *= factor;
    for (double& v : p.biases[l]) v *= factor;
  }
}

void add_in_place(MlpParams& target, const MlpParams& delta) {
  require_same_shape(target, delta);
  for (std::size_t l = 0; l < target.num_layers(); ++l) {
    for (std::size_t i = 0; i < target.weights[l].size(); ++i) {
      target.weights[l][i] += delta.weights[l][i];
    }
    for (std::size_t i = 0; i < target.biases[l].size(); ++i) {
      target.biases[l][i] += delta.biases[l][i];
    }
  }
}

bool all_finite(const MlpParams& p) {
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    for (double v : p.weights[l]) if (!std::isfinite(v)) return false;
  }
  for (std::size_t l = 0; l < p.biases.size(); ++l) {
    for (double v : p.biases[l]) if (!std::isfinite(v)) return false;
  }
  return true;
}

std::uint64_t params_hash(const MlpParams& p) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t word) {
    for (int b = 0; b < 8; ++b) {
      h ^= (word >> (8 * b)) & 0xffULL;
      h *= 0x100000001b3ULL;
    }
  };
  for (std::size_t s : p.layer_sizes) mix(s);
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    for (double v : p.weights[l]) mix(std::bit_cast<std::uint64_t>(v));
    for (double v : p.biases[l]) mix(std::bit_cast<std::uint64_t>(v));
  }
  return h;
}

nlohmann::json mlp_to_json(const MlpParams& p) {
  nlohmann::json j;
  j["format_version"] = kWeightFormatVersion;
  j["layer_sizes"] = p.layer_sizes;
  j["activation"] = "tanh";
  nlohmann::json weights = nlohmann::json::array();
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    const std::size_t n_in = p.layer_sizes[l];
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t o = 0; o < p.layer_sizes[l + 1]; ++o) {
      rows.push_back(std::vector<double>(
          p.weights[l].begin() + static_cast<std::ptrdiff_t>(o * n_in),
          p.weights[l].begin() + static_cast<std::ptrdiff_t>((o + 1) * n_in)));
    }
    weights.push_back(std::move(rows));
  }
  j["weights"] = std::move(weights);
  j["biases"] = p.biases;
  return j;
}

MlpParams mlp_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<int>() != kWeightFormatVersion) {
      throw Error(ErrorCode::kShapeMismatch, "unsupported weight format_version");
    }
    if (j.at("activation").get<std::string>() != "tanh") {
      throw Error(ErrorCode::kShapeMismatch, "unsupported activation");
    }
    MlpParams p;
    p.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
    for (const auto& layer : j.at("weights")) {
      std::vector<double> flat;
      for (const auto& row : layer) {
        for (const auto& v : row) flat.push_back(v.get<double>());
      }
      p.weights.push_back(std::move(flat));
    }
    p.biases = j.at("biases").get<std::vector<std::vector<double>>>();
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kShapeMismatch,
                std::string("bad weight json: ") + e.what());
  }
}

void write_file_atomic(const std::filesystem::path& path,
                       const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw Error(ErrorCode::kIo, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kIo, path.string() + ": " + e.what());
  }
}

void save_mlp(const MlpParams& p, const std::filesystem::path& path) {
  write_file_atomic(path, mlp_to_json(p).dump(1) + "\n");
}

MlpParams load_mlp(const std::filesystem::path& path) {
  return mlp_from_json(read_json_file(path));
}

}  // namespace asknav
