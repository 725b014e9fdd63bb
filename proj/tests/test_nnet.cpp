#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "asknav/nnet.hpp"
#include "test_util.hpp"

using namespace asknav;

namespace {

// Flattens every parameter into one vector (weights then biases per layer).
std::vector<double*> parameter_slots(MlpParams& p) {
  std::vector<double*> out;
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    for (double& w : p.weights[l]) out.push_back(&w);
    for (double& b : p.biases[l]) out.push_back(&b);
  }
  return out;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// ||analytic - numeric|| / (||analytic|| + ||numeric||) over all parameters.
double gradient_error(MlpParams params, const std::vector<double>& input,
                      const std::vector<double>& output_grad) {
  const MlpOutput fwd = mlp_forward(params, input);
  MlpGradients g = mlp_backward(params, fwd.cache, output_grad);
  std::vector<double*> analytic = parameter_slots(g.params);
  std::vector<double*> slots = parameter_slots(params);
  const double h = 1e-5;
  double diff = 0.0;
  double norm = 0.0;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const double keep = *slots[i];
    *slots[i] = keep + h;
    const double up = dot(mlp_predict(params, input), output_grad);
    *slots[i] = keep - h;
    const double down = dot(mlp_predict(params, input), output_grad);
    *slots[i] = keep;
    const double numeric = (up - down) / (2 * h);
    diff += (numeric - *analytic[i]) * (numeric - *analytic[i]);
    norm += std::abs(numeric) + std::abs(*analytic[i]);
  }
  // input gradient as well
  std::vector<double> x = input;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = dot(mlp_predict(params, x), output_grad);
    x[i] = keep - h;
    const double down = dot(mlp_predict(params, x), output_grad);
    x[i] = keep;
    const double numeric = (up - down) / (2 * h);
    diff += (numeric - g.input[i]) * (numeric - g.input[i]);
    norm += std::abs(numeric) + std::abs(g.input[i]);
  }
  return std::sqrt(diff) / std::max(norm, 1e-12);
}

}  // namespace

TEST_CASE("forward examples") {
  const MlpParams zero = MlpParams::zeros({3, 4, 2});
  CHECK(mlp_predict(zero, std::vector<double>{1, 2, 3}) == std::vector<double>{0, 0});

  MlpParams identity = MlpParams::zeros({3, 3});
  identity.weights[0] = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  const std::vector<double> x{0.3, -2.0, 7.5};
  CHECK(mlp_predict(identity, x) == x);

  // 2-3-2 fixture, evaluated by hand:
  //   hidden = tanh(1, -0.5, -0.5)
  //   out0 = h0 + h1 + 0.1, out1 = -h1 + 2 h2
  MlpParams fixture = MlpParams::zeros({2, 3, 2});
  fixture.weights[0] = {1, 0, 0, 1, 1, 1};
  fixture.biases[0] = {0, 0.5, -0.5};
  fixture.weights[1] = {1, 1, 0, 0, -1, 2};
  fixture.biases[1] = {0.1, 0};
  const std::vector<double> out = mlp_predict(fixture, std::vector<double>{1, -1});
  CHECK(out[0] == doctest::Approx(0.39947699869575516).epsilon(1e-14));
  CHECK(out[1] == doctest::Approx(-0.46211715726000974).epsilon(1e-14));

  CHECK(code_of([&] { mlp_forward(fixture, std::vector<double>{1, 2, 3}); }) ==
        ErrorCode::kShapeMismatch);
}

TEST_CASE("backward examples") {
  const MlpParams p = init_mlp({3, 5, 2}, 4);
  const std::vector<double> x{0.1, -0.4, 0.9};
  const MlpOutput fwd = mlp_forward(p, x);
  const MlpGradients zero = mlp_backward(p, fwd.cache, std::vector<double>{0, 0});
  CHECK(squared_norm(zero.params) == 0.0);

  MlpParams linear = MlpParams::zeros({1, 1});
  linear.weights[0] = {0.7};
  const MlpOutput f1 = mlp_forward(linear, std::vector<double>{2.5});
  const MlpGradients g1 = mlp_backward(linear, f1.cache, std::vector<double>{1});
  CHECK(g1.params.weights[0][0] == doctest::Approx(2.5));
  CHECK(g1.params.biases[0][0] == doctest::Approx(1.0));

  CHECK(code_of([&] { mlp_backward(p, fwd.cache, std::vector<double>{1}); }) ==
        ErrorCode::kShapeMismatch);
}

TEST_CASE("random 3-5-2 network matches finite differences") {
  const MlpParams p = init_mlp({3, 5, 2}, 77);
  CHECK(gradient_error(p, {0.2, -0.7, 0.4}, {1.0, -0.5}) < 1e-4);
}

TEST_CASE("gradient check over 50 random networks") {
  std::mt19937 rng(2024);
  std::uniform_int_distribution<std::size_t> width(1, 8);
  std::uniform_int_distribution<int> depth(1, 4);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  for (int n = 0; n < 50; ++n) {
    std::vector<std::size_t> sizes{width(rng)};
    const int layers = depth(rng);
    for (int l = 0; l < layers; ++l) sizes.push_back(width(rng));
    MlpParams p = init_mlp(sizes, static_cast<std::uint64_t>(n));
    for (auto& b : p.biases) {
      for (double& v : b) v = 0.3 * normal(rng);
    }
    std::vector<double> x(sizes.front());
    for (double& v : x) v = normal(rng);
    std::vector<double> g(sizes.back());
    for (double& v : g) v = normal(rng);
    worst = std::max(worst, gradient_error(p, x, g));
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("softmax cross-entropy") {
  CHECK(softmax_cross_entropy(std::vector<double>{0, 0}, 0).loss == doctest::Approx(std::log(2.0)));
  CHECK(softmax_cross_entropy(std::vector<double>{0, 0}, 1).loss == doctest::Approx(std::log(2.0)));
  const CrossEntropy big = softmax_cross_entropy(std::vector<double>{1000, 0}, 0);
  CHECK(std::isfinite(big.loss));
  CHECK(big.loss == doctest::Approx(0.0));
  CHECK(softmax_cross_entropy(std::vector<double>{2, -1}, 1).loss ==
        doctest::Approx(std::log(1 + std::exp(3.0))).epsilon(1e-12));
  CHECK(softmax_cross_entropy(std::vector<double>{2, -1}, 1).loss == doctest::Approx(3.0486).epsilon(1e-4));

  const CrossEntropy ce = softmax_cross_entropy(std::vector<double>{0.5, -0.3, 1.2}, 2);
  const std::vector<double> p = softmax(std::vector<double>{0.5, -0.3, 1.2});
  CHECK(ce.logits_grad[0] == doctest::Approx(p[0]));
  CHECK(ce.logits_grad[2] == doctest::Approx(p[2] - 1.0));

  CHECK(code_of([] { softmax_cross_entropy(std::vector<double>{0, 0}, 2); }) ==
        ErrorCode::kLabelOutOfRange);

  std::mt19937 rng(5);
  std::normal_distribution<double> normal(0.0, 5.0);
  for (int i = 0; i < 1000; ++i) {
    const std::vector<double> logits{normal(rng), normal(rng), normal(rng)};
    CHECK(softmax_cross_entropy(logits, static_cast<std::size_t>(i % 3)).loss >= 0.0);
  }
}

TEST_CASE("adam step") {
  MlpParams p = init_mlp({2, 3}, 1);
  const MlpParams before = p;
  OptState opt = make_opt_state(p, 0.1);
  adam_step(p, MlpParams::zeros({2, 3}), opt);
  CHECK(p == before);
  CHECK(opt.step == 1);

  MlpParams scalar = MlpParams::zeros({1, 1});
  MlpParams grad = MlpParams::zeros({1, 1});
  grad.weights[0][0] = 1.0;
  OptState s = make_opt_state(scalar, 0.1);
  adam_step(scalar, grad, s);
  CHECK(scalar.weights[0][0] == doctest::Approx(-0.1).epsilon(1e-6));

  MlpParams a = init_mlp({2, 3}, 9);
  MlpParams b = a;
  OptState oa = make_opt_state(a, 0.01);
  OptState ob = make_opt_state(b, 0.01);
  const MlpParams g = init_mlp({2, 3}, 10);
  adam_step(a, g, oa);
  adam_step(b, g, ob);
  CHECK(a == b);

  CHECK(code_of([&] { adam_step(a, MlpParams::zeros({3, 3}), oa); }) ==
        ErrorCode::kShapeMismatch);
}

TEST_CASE("init is seeded and bounded") {
  const MlpParams a = init_mlp({18, 64, 64}, 3);
  CHECK(a == init_mlp({18, 64, 64}, 3));
  CHECK_FALSE(a == init_mlp({18, 64, 64}, 4));
  const double bound = std::sqrt(6.0 / (18 + 64));
  for (double w : a.weights[0]) CHECK(std::abs(w) <= bound);
}

TEST_CASE("weight file round trip is bit identical") {
  const MlpParams p = init_mlp({4, 7, 3}, 12);
  const auto path = std::filesystem::temp_directory_path() / "asknav_weights_test.json";
  save_mlp(p, path);
  const MlpParams back = load_mlp(path);
  CHECK(back == p);
  const std::vector<double> x{0.1, 0.2, -0.3, 0.4};
  CHECK(mlp_predict(back, x) == mlp_predict(p, x));
  CHECK(params_hash(back) == params_hash(p));
  std::filesystem::remove(path);
}
