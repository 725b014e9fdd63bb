#ifndef ASKNAV_NNET_HPP_
#define ASKNAV_NNET_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

namespace asknav {

// Dense multilayer perceptron: tanh on hidden layers, identity on the output.
// Layer l maps layer_sizes[l] inputs to layer_sizes[l + 1] outputs; its weight
// matrix is stored row-major with one row per output unit.
struct MlpParams {
  std::vector<std::size_t> layer_sizes;
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  std::size_t num_layers() const { return weights.size(); }
  std::size_t input_size() const { return layer_sizes.front(); }
  std::size_t output_size() const { return layer_sizes.back(); }
  std::size_t parameter_count() const;

  // Throws ShapeMismatch on inconsistent shapes or non-finite values.
  void validate() const;

  static MlpParams zeros(std::vector<std::size_t> layer_sizes);
  friend bool operator==(const MlpParams&, const MlpParams&) = default;
};

// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
MlpParams init_mlp(std::vector<std::size_t> layer_sizes, std::uint64_t seed);

// activations[0] is the input, activations[l + 1] the output of layer l.
struct MlpCache {
  std::vector<std::vector<double>> activations;
};

struct MlpOutput {
  std::vector<double> output;
  MlpCache cache;
};

MlpOutput mlp_forward(const MlpParams& params, std::span<const double> input);
std::vector<double> mlp_predict(const MlpParams& params,
                                std::span<const double> input);

struct MlpGradients {
  MlpParams params;
  std::vector<double> input;
};

// Reverse-mode gradient of dot(output, output_grad).
MlpGradients mlp_backward(const MlpParams& params, const MlpCache& cache,
                          std::span<const double> output_grad);

// Batch form: adds into `grads` (shaped like params) and optionally writes
// the input gradient.
void mlp_backward_accumulate(const MlpParams& params, const MlpCache& cache,
                             std::span<const double> output_grad,
                             MlpParams& grads,
                             std::vector<double>* input_grad = nullptr);

std::vector<double> softmax(std::span<const double> logits);
std::vector<double> log_softmax(std::span<const double> logits);

struct CrossEntropy {
  double loss = 0.0;
  std::vector<double> logits_grad;
};

CrossEntropy softmax_cross_entropy(std::span<const double> logits,
                                   std::size_t label);

struct OptState {
  MlpParams first_moment;
  MlpParams second_moment;
  std::uint64_t step = 0;
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

OptState make_opt_state(const MlpParams& params, double learning_rate = 3e-4);

// Bias-corrected adaptive-moment update, in place.
void adam_step(MlpParams& params, const MlpParams& grads, OptState& opt);

// Element-wise helpers over parameter-shaped values.
double squared_norm(const MlpParams& p);
void scale_in_place(MlpParams& p, double factor);
void add_in_place(MlpParams& target, const MlpParams& delta);
bool all_finite(const MlpParams& p);

// FNV-1a over the raw bits of every value; equal hashes mean bit-identical
// parameters.
std::uint64_t params_hash(const MlpParams& p);

inline constexpr int kWeightFormatVersion = 1;

nlohmann::json mlp_to_json(const MlpParams& p);
MlpParams mlp_from_json(const nlohmann::json& j);
void save_mlp(const MlpParams& p, const std::filesystem::path& path);
MlpParams load_mlp(const std::filesystem::path& path);

// Writes `text` to a sibling temporary and renames it into place so readers
// never observe a partial file.
void write_file_atomic(const std::filesystem::path& path,
                       const std::string& text);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace asknav

#endif  // ASKNAV_NNET_HPP_
