#include <doctest.h>

#include <cmath>
#include <random>

#include "asknav/error.hpp"
#include "asknav/ppo.hpp"
#include "test_util.hpp"

using namespace asknav;

namespace {

// Plain backward recursion, written out independently of the library.
std::vector<double> gae_oracle(const std::vector<double>& r, const std::vector<double>& v,
                               double gamma, double lambda) {
  const std::size_t n = r.size();
  std::vector<double> adv(n, 0.0);
  double next = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double v_next = i + 1 < n ? v[i + 1] : 0.0;
    const double delta = r[i] + gamma * v_next - v[i];
    next = delta + gamma * lambda * next;
    adv[i] = next;
  }
  return adv;
}

// Two-armed bandit: the observation is constant, only action 1 pays.
class Bandit : public DiscreteEnv {
 public:
  std::size_t observation_size() const override { return 1; }
  std::size_t num_actions() const override { return 2; }
  std::vector<double> reset() override { return {1.0}; }
  Step step(std::size_t action) override { return {{1.0}, action == 1 ? 1.0 : 0.0, true}; }
};

ActorCritic small_model(std::uint64_t seed) {
  ActorCritic m;
  m.actor = {init_mlp({1, 8, 2}, seed)};
  m.critic = make_critic(1, 8, seed + 1);
  return m;
}

PpoConfig bandit_config(long steps) {
  PpoConfig c;
  c.total_timesteps = steps;
  c.rollout_length = 128;
  c.minibatch_size = 32;
  c.learning_rate = 3e-3;
  c.hidden_width = 8;
  return c;
}

}  // namespace

TEST_CASE("GAE examples") {
  {
    const GaeResult g = compute_gae(std::vector<double>{1.0}, std::vector<double>{0.0}, 0.99, 0.95);
    CHECK(g.advantages[0] == doctest::Approx(1.0));
    CHECK(g.returns[0] == doctest::Approx(1.0));
  }
  {
    // lambda = 1 gives the discounted return minus the baseline
    const GaeResult g = compute_gae(std::vector<double>{0.0, 0.0, 1.0},
                                    std::vector<double>{0.0, 0.0, 0.0}, 0.5, 1.0);
    CHECK(g.advantages[0] == doctest::Approx(0.25));
    CHECK(g.advantages[1] == doctest::Approx(0.5));
    CHECK(g.advantages[2] == doctest::Approx(1.0));
  }
  {
    // by hand: d2 = 1 - 0.5 = 0.5, d1 = 0 + 0.9*0.5 - 0.2 = 0.25, d0 = 1 + 0.9*0.2 - 0.1 = 1.08
    // A2 = 0.5, A1 = 0.25 + 0.45*0.5 = 0.475, A0 = 1.08 + 0.45*0.475 = 1.29375
    const GaeResult g = compute_gae(std::vector<double>{1.0, 0.0, 1.0},
                                    std::vector<double>{0.1, 0.2, 0.5}, 0.9, 0.5);
    CHECK(g.advantages[0] == doctest::Approx(1.29375));
    CHECK(g.advantages[1] == doctest::Approx(0.475));
    CHECK(g.advantages[2] == doctest::Approx(0.5));
    CHECK(g.returns[0] == doctest::Approx(1.39375));
  }
  CHECK(code_of([] {
          compute_gae(std::vector<double>{1.0, 2.0}, std::vector<double>{0.0}, 0.9, 0.9);
        }) == ErrorCode::kLengthMismatch);
}

TEST_CASE("GAE matches the recursion oracle on random episodes") {
  std::mt19937 rng(31);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> len(1, 40);
  std::uniform_real_distribution<double> unit(0.05, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = len(rng);
    std::vector<double> r(n), v(n);
    for (int i = 0; i < n; ++i) {
      r[i] = normal(rng);
      v[i] = normal(rng);
    }
    const double gamma = unit(rng);
    const double lambda = unit(rng);
    const GaeResult g = compute_gae(r, v, gamma, lambda);
    const std::vector<double> expect = gae_oracle(r, v, gamma, lambda);
    for (int i = 0; i < n; ++i) {
      CHECK(g.advantages[i] == doctest::Approx(expect[i]).epsilon(1e-10));
      CHECK(g.returns[i] == doctest::Approx(expect[i] + v[i]).epsilon(1e-10));
    }
  }
}

TEST_CASE("rollout GAE cuts at episode ends") {
  // two one-step episodes back to back must not leak into each other
  const std::vector<double> r{1.0, 2.0};
  const std::vector<double> v{0.5, 0.5};
  const std::vector<std::uint8_t> done{1, 1};
  const GaeResult g = compute_gae(r, v, done, 100.0, 0.9, 0.9);
  CHECK(g.advantages[0] == doctest::Approx(0.5));
  CHECK(g.advantages[1] == doctest::Approx(1.5));

  // an open segment bootstraps from last_value
  const std::vector<std::uint8_t> open{0, 0};
  const GaeResult b = compute_gae(r, v, open, 1.0, 0.5, 1.0);
  // d1 = 2 + 0.5*1 - 0.5 = 2, d0 = 1 + 0.25 - 0.5 = 0.75, A0 = 0.75 + 0.5*2 = 1.75
  CHECK(b.advantages[1] == doctest::Approx(2.0));
  CHECK(b.advantages[0] == doctest::Approx(1.75));
}

TEST_CASE("normalize_advantages") {
  std::vector<double> a{1.0, 2.0, 3.0, 4.0};
  normalize_advantages(a);
  double mean = 0.0, var = 0.0;
  for (double x : a) mean += x / 4;
  for (double x : a) var += (x - mean) * (x - mean) / 4;
  CHECK(mean == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(var == doctest::Approx(1.0).epsilon(1e-6));
  std::vector<double> single{5.0};
  normalize_advantages(single);
  CHECK(single[0] == doctest::Approx(0.0));
}

TEST_CASE("surrogate gradient matches finite differences") {
  std::mt19937 rng(8);
  std::normal_distribution<double> normal(0.0, 1.0);
  ActorCritic model;
  model.actor = {init_mlp({3, 6, 3}, 5)};
  model.critic = make_critic(3, 6, 6);
  PpoConfig cfg;
  cfg.entropy_coeff = 0.05;

  PpoMinibatch batch;
  for (int i = 0; i < 16; ++i) {
    std::vector<double> obs{normal(rng), normal(rng), normal(rng)};
    const std::vector<double> logp = log_softmax(chain_forward(model.actor, obs));
    const std::size_t a = static_cast<std::size_t>(i % 3);
    batch.observations.push_back(obs);
    batch.actions.push_back(a);
    // old policy slightly off so some ratios are away from 1 but inside the clip
    batch.old_log_probs.push_back(logp[a] + 0.05 * normal(rng));
    batch.advantages.push_back(normal(rng));
    batch.returns.push_back(normal(rng));
  }

  const PpoLoss base = ppo_loss(model, batch, cfg);
  auto objective = [&](const ActorCritic& m) {
    const PpoLoss l = ppo_loss(m, batch, cfg);
    return l.policy_loss - cfg.entropy_coeff * l.entropy;
  };
  auto value_objective = [&](const ActorCritic& m) {
    return cfg.value_coeff * ppo_loss(m, batch, cfg).value_loss;
  };

  const double h = 1e-6;
  double diff = 0.0, norm = 0.0;
  for (std::size_t l = 0; l < model.actor[0].num_layers(); ++l) {
    for (std::size_t i = 0; i < model.actor[0].weights[l].size(); ++i) {
      ActorCritic up = model, down = model;
      up.actor[0].weights[l][i] += h;
      down.actor[0].weights[l][i] -= h;
      const double numeric = (objective(up) - objective(down)) / (2 * h);
      const double analytic = base.actor_grads[0].weights[l][i];
      diff += (numeric - analytic) * (numeric - analytic);
      norm += numeric * numeric;
    }
  }
  CHECK(std::sqrt(diff) / std::sqrt(norm) < 1e-3);

  diff = norm = 0.0;
  for (std::size_t l = 0; l < model.critic.num_layers(); ++l) {
    for (std::size_t i = 0; i < model.critic.weights[l].size(); ++i) {
      ActorCritic up = model, down = model;
      up.critic.weights[l][i] += h;
      down.critic.weights[l][i] -= h;
      const double numeric = (value_objective(up) - value_objective(down)) / (2 * h);
      const double analytic = base.critic_grads.weights[l][i];
      diff += (numeric - analytic) * (numeric - analytic);
      norm += numeric * numeric;
    }
  }
  CHECK(std::sqrt(diff) / std::sqrt(norm) < 1e-3);
}

TEST_CASE("clipped samples carry no policy gradient") {
  ActorCritic model = small_model(3);
  PpoConfig cfg;
  cfg.entropy_coeff = 0.0;
  PpoMinibatch batch;
  const std::vector<double> obs{1.0};
  const std::vector<double> logp = log_softmax(chain_forward(model.actor, obs));
  batch.observations = {obs};
  batch.actions = {0};
  // ratio = e^1 > 1 + eps with positive advantage: clipped
  batch.old_log_probs = {logp[0] - 1.0};
  batch.advantages = {1.0};
  batch.returns = {0.0};
  const PpoLoss l = ppo_loss(model, batch, cfg);
  CHECK(squared_norm(l.actor_grads[0]) == 0.0);
  CHECK(l.clip_fraction == doctest::Approx(1.0));
}

TEST_CASE("PPO learns a two-armed bandit") {
  ActorCritic model = small_model(11);
  Bandit env;
  ppo_train(env, model, bandit_config(4000), 2);
  const std::vector<double> p = softmax(chain_forward(model.actor, std::vector<double>{1.0}));
  CHECK(p[1] > 0.9);
}

TEST_CASE("zero timesteps leave the model unchanged") {
  ActorCritic model = small_model(4);
  const ActorCritic before = model;
  Bandit env;
  ppo_train(env, model, bandit_config(0), 1);
  CHECK(model.actor[0] == before.actor[0]);
  CHECK(model.critic == before.critic);
}

TEST_CASE("PPO is deterministic for a fixed seed") {
  ActorCritic a = small_model(4);
  ActorCritic b = small_model(4);
  Bandit ea, eb;
  int updates = 0;
  ppo_train(ea, a, bandit_config(600), 9, [&](const PpoUpdateLog&) { ++updates; });
  ppo_train(eb, b, bandit_config(600), 9);
  CHECK(params_hash(a.actor[0]) == params_hash(b.actor[0]));
  CHECK(params_hash(a.critic) == params_hash(b.critic));
  CHECK(updates == 5);

  ActorCritic c = small_model(4);
  Bandit ec;
  ppo_train(ec, c, bandit_config(600), 10);
  CHECK(params_hash(a.actor[0]) != params_hash(c.actor[0]));
}

TEST_CASE("PPO rejects mismatched shapes and bad configs") {
  ActorCritic model;
  model.actor = {init_mlp({2, 4, 2}, 1)};
  model.critic = make_critic(2, 4, 2);
  Bandit env;
  CHECK(code_of([&] { ppo_train(env, model, bandit_config(10), 1); }) == ErrorCode::kShapeMismatch);
  ActorCritic ok = small_model(1);
  PpoConfig bad = bandit_config(10);
  bad.clip_epsilon = 0.0;
  CHECK(code_of([&] { ppo_train(env, ok, bad, 1); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("config JSON round trip") {
  PpoConfig c = bandit_config(1234);
  c.gamma = 0.97;
  const PpoConfig back = ppo_config_from_json(ppo_config_to_json(c));
  CHECK(back.total_timesteps == 1234);
  CHECK(back.gamma == c.gamma);
  CHECK(back.minibatch_size == c.minibatch_size);
  CHECK(back.learning_rate == c.learning_rate);
}
