#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "asknav/agent.hpp"
#include "asknav/bc.hpp"
#include "asknav/error.hpp"
#include "asknav/help_training.hpp"
#include "asknav/metrics.hpp"
#include "asknav/nnet.hpp"
#include "asknav/rng.hpp"
#include "asknav/runner.hpp"
#include "asknav/session_server.hpp"
#include "asknav/suites.hpp"
#include "asknav/trace.hpp"

namespace fs = std::filesystem;
using namespace asknav;

namespace {

std::string utc_stamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

AgentPolicy load_agent_or_scripted(const std::string& path) {
  if (path.empty()) return make_scripted_agent(1);
  return load_agent(path);
}

std::string stem_or(const std::string& path, const std::string& fallback) {
  return path.empty() ? fallback : fs::path(path).stem().string();
}

std::vector<fs::path> trace_files(const std::vector<std::string>& inputs) {
  std::vector<fs::path> out;
  for (const std::string& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(in)) {
        if (e.path().extension() == ".jsonl") found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else {
      out.emplace_back(in);
    }
  }
  return out;
}

// --- gen-maps ---------------------------------------------------------------

struct GenMapsArgs {
  std::string out = "data";
  std::uint64_t train_seed = 11;
  std::uint64_t val_seed = 23;
};

int gen_maps(const GenMapsArgs& a) {
  const fs::path out(a.out);
  fs::create_directories(out / "maps");
  std::size_t count = 0;
  for (const Fixture& f : fixtures()) {
    write_file_atomic(out / "maps" / (f.name + ".map"), fixture_map(f.name).to_text());
    ++count;
  }
  const std::pair<const char*, SuiteConfig> suites[] = {
      {"train", training_suite_config(a.train_seed)},
      {"val", validation_suite_config(a.val_seed)}};
  for (const auto& [name, config] : suites) {
    const Suite suite = generate_suite(config);
    for (const GridMap& m : suite.maps) {
      write_file_atomic(out / "maps" / (m.map_id() + ".map"), m.to_text());
      ++count;
    }
    write_episodes(suite.episodes, out / (std::string(name) + ".jsonl"));
    std::cout << name << ": " << suite.maps.size() << " maps, " << suite.episodes.size()
              << " episodes\n";
  }
  write_episodes(trap_fixture_episodes(), out / "trap12.jsonl");
  std::cout << "wrote " << count << " maps to " << (out / "maps").string() << "\n";
  return 0;
}

// --- pretrain-agent ---------------------------------------------------------

struct PretrainArgs {
  std::string maps;
  std::string out = "agent.json";
  std::string kind = "learned";
  std::string log;
  long steps = 50'000;
  std::uint64_t seed = 0;
};

int pretrain(const PretrainArgs& a) {
  if (a.kind == "scripted") {
    save_agent(make_scripted_agent(a.seed), a.out);
    std::cout << "wrote scripted agent to " << a.out << "\n";
    return 0;
  }
  const MapSet set = load_map_dir(a.maps);
  std::vector<GridMap> maps;
  for (const auto& [id, m] : set) maps.push_back(m);
  PretrainConfig config;
  config.steps = a.steps;
  config.seed = a.seed;
  std::string log;
  const AgentPolicy agent = pretrain_agent(maps, config, [&](const PpoUpdateLog& u) {
    nlohmann::json j = {{"update", u.update}, {"timesteps", u.timesteps},
                        {"mean_return", u.mean_return}, {"loss_policy", u.loss_policy},
                        {"loss_value", u.loss_value}, {"entropy", u.entropy}};
    log += j.dump() + "\n";
    if (u.update % 10 == 0) {
      std::cout << "update " << u.update << " steps " << u.timesteps << " return "
                << u.mean_return << "\n";
    }
  });
  save_agent(agent, a.out);
  if (!a.log.empty()) write_file_atomic(a.log, log);
  std::cout << "wrote learned agent to " << a.out << "\n";
  return 0;
}

// --- record-demos -----------------------------------------------------------

struct ServeArgs {
  std::string maps;
  std::string episodes;
  std::string agent;
  std::string policy;
  std::string address = "127.0.0.1";
  unsigned short port = 8765;
  int budget = 25;
  double timeout_s = 60.0;
  int step_delay_ms = 250;
  std::string traces = "traces";
  std::string static_dir;
  int sessions = 0;
  std::string timestamp;
};

int run_server(const ServeArgs& a, SessionMode mode) {
  const MapSet maps = load_map_dir(a.maps);
  const std::vector<EpisodeSpec> episodes = read_episodes(a.episodes);
  const AgentPolicy agent = load_agent_or_scripted(a.agent);
  std::optional<HelpPolicy> policy;
  if (mode == SessionMode::kEvaluation && !a.policy.empty() && a.policy != "none") {
    policy = load_help_policy(a.policy);
  }
  ServeConfig config;
  config.address = a.address;
  config.port = a.port;
  config.mode = mode;
  config.budget.max_steps_per_request = a.budget;
  config.response_timeout =
      std::chrono::milliseconds(static_cast<long>(a.timeout_s * 1000.0));
  config.step_delay = std::chrono::milliseconds(a.step_delay_ms);
  config.trace_dir = a.traces;
  if (!a.static_dir.empty()) config.static_dir = a.static_dir;
  config.max_sessions = a.sessions;
  config.agent_id = stem_or(a.agent, "scripted");
  config.help_policy_id = policy ? stem_or(a.policy, "none") : "none";
  config.timestamp = a.timestamp.empty() ? utc_stamp() : a.timestamp;
  SessionServer server(maps, episodes, agent, policy ? &*policy : nullptr, config);
  std::cout << (mode == SessionMode::kDemonstration ? "demonstration" : "evaluation")
            << " sessions on ws://" << a.address << ":" << server.port() << "/\n"
            << std::flush;
  server.run();
  for (const SessionOutcome& o : server.outcomes()) {
    std::cout << o.map_id << " seed " << o.seed << ": "
              << (o.completed ? "completed" : "aborted") << " -> " << o.trace_path.string()
              << "\n";
  }
  return 0;
}

struct RecordArgs {
  ServeArgs serve;
  bool scripted = false;
  int count = 8;
  int patience = 3;
  int takeover = 10;
};

int record_demos(const RecordArgs& a) {
  if (!a.scripted) {
    ServeArgs s = a.serve;
    if (s.sessions == 0) s.sessions = a.count;
    return run_server(s, SessionMode::kDemonstration);
  }
  const MapSet maps = load_map_dir(a.serve.maps);
  const std::vector<EpisodeSpec> episodes = read_episodes(a.serve.episodes);
  const AgentPolicy agent = load_agent_or_scripted(a.serve.agent);
  DemonstratorConfig config;
  config.patience = a.patience;
  config.takeover_steps = a.takeover;
  config.budget.max_steps_per_request = a.serve.budget;
  const std::string stamp = a.serve.timestamp.empty() ? utc_stamp() : a.serve.timestamp;
  for (const EpisodeSpec& e : demo_episodes(episodes, a.count)) {
    EpisodeTrace t = run_scripted_demonstration(find_map(maps, e.map_id), e, agent,
                                                config, stamp);
    t.header.agent_id = stem_or(a.serve.agent, "scripted");
    const fs::path path = fs::path(a.serve.traces) / trace_file_name(t.header);
    write_trace(t, path);
    const TraceCounts c = count_steps(t);
    std::cout << path.string() << ": " << t.steps.size() << " steps, " << c.help_requests
              << " interrupts\n";
  }
  return 0;
}

// --- train-bc ---------------------------------------------------------------

struct TrainBcArgs {
  std::string demos;
  std::string maps;
  std::string agent;
  std::string variant = "all";
  std::string out = "bc.json";
  std::string log;
  int epochs = 3;
  double lr = 1e-3;
  int batch = 32;
  std::uint64_t seed = 0;
};

int train_bc(const TrainBcArgs& a) {
  const MapSet maps = load_map_dir(a.maps);
  const AgentPolicy agent = load_agent_or_scripted(a.agent);
  const FeatureVariant variant = variant_from_string(a.variant);
  std::vector<LabeledStep> dataset;
  for (const fs::path& p : trace_files({a.demos})) {
    const EpisodeTrace t = read_trace(p);
    const std::vector<LabeledStep> labels =
        label_demonstration(t, find_map(maps, t.header.spec.map_id), agent, variant);
    dataset.insert(dataset.end(), labels.begin(), labels.end());
  }
  BcConfig config;
  config.epochs = a.epochs;
  config.learning_rate = a.lr;
  config.minibatch_size = a.batch;
  config.seed = a.seed;
  const BcResult r =
      bc_train(dataset, make_help_policy(variant, a.seed, agent.feature_width()), config);
  std::string log;
  for (std::size_t i = 0; i < r.epoch_loss.size(); ++i) {
    log += nlohmann::json{{"epoch", i + 1}, {"loss", r.epoch_loss[i]}}.dump() + "\n";
    std::cout << "epoch " << i + 1 << " loss " << r.epoch_loss[i] << "\n";
  }
  save_help_policy(r.policy, a.out);
  write_file_atomic(a.log.empty() ? fs::path(a.out).replace_extension(".loss.jsonl") : fs::path(a.log),
                    log);
  std::cout << dataset.size() << " labelled steps; wrote " << a.out << "\n";
  return 0;
}

// --- train-ppo --------------------------------------------------------------

struct TrainPpoArgs {
  std::string maps;
  std::string episodes;
  std::string agent;
  std::string config;
  std::string variant;
  std::string out = "ppo.json";
  std::string log;
  long steps = -1;
  int budget = -1;
  std::optional<std::uint64_t> seed;
};

int train_ppo(const TrainPpoArgs& a) {
  HelpTrainingConfig config;
  if (!a.config.empty()) config = help_training_config_from_json(read_json_file(a.config));
  if (!a.variant.empty()) config.variant = variant_from_string(a.variant);
  if (a.steps >= 0) config.ppo.total_timesteps = a.steps;
  if (a.budget > 0) config.budget.max_steps_per_request = a.budget;
  if (a.seed) config.seed = *a.seed;
  const MapSet maps = load_map_dir(a.maps);
  const std::vector<EpisodeSpec> episodes = read_episodes(a.episodes);
  const AgentPolicy agent = load_agent_or_scripted(a.agent);
  const HelpPolicy initial = make_help_policy(config.variant, config.seed, agent.feature_width());
  const HelpTrainingResult r =
      ppo_train_help(maps, episodes, agent, initial, config, {},
                     [](const HelpTrainingLogEntry& e) {
                       if (e.update % 10 == 0) {
                         std::cout << "update " << e.update << " return " << e.mean_return
                                   << " ask rate " << e.ask_rate << "\n";
                       }
                     });
  save_help_policy(r.policy, a.out);
  const fs::path log = a.log.empty() ? fs::path(a.out).replace_extension(".log.jsonl") : fs::path(a.log);
  write_training_log(r.log, log);
  write_file_atomic(fs::path(a.out).replace_extension(".config.json"),
                    help_training_config_to_json(config).dump(2) + "\n");
  std::cout << "wrote " << a.out << " and " << log.string() << "\n";
  return 0;
}

// --- eval -------------------------------------------------------------------

struct EvalArgs {
  std::string maps;
  std::string episodes;
  std::string agent;
  std::string policy = "none";
  std::string intervener = "sim";
  double noise_rate = 0.2;
  int budget = 25;
  std::string mode = "argmax";
  std::uint64_t seed = 0;
  std::string group;
  bool split_traps = false;
  std::string report;
  std::string traces;
  std::string timestamp;
};

int eval(const EvalArgs& a) {
  const MapSet maps = load_map_dir(a.maps);
  const std::vector<EpisodeSpec> episodes = read_episodes(a.episodes);
  const AgentPolicy agent = load_agent_or_scripted(a.agent);
  RunConfig base;
  std::optional<HelpPolicy> policy;
  if (a.policy == "none") {
    base.gate.kind = GateKind::kAlwaysProceed;
  } else if (a.policy == "always") {
    base.gate.kind = GateKind::kAlwaysAsk;
  } else {
    policy = load_help_policy(a.policy);
    base.gate = {GateKind::kPolicy, &*policy,
                 a.mode == "sample" ? DecisionMode::kSample : DecisionMode::kArgmax};
    if (a.mode != "sample" && a.mode != "argmax") {
      throw Error(ErrorCode::kInvalidArgument, "mode must be argmax or sample");
    }
  }
  base.intervener.kind = intervener_from_string(a.intervener);
  if (base.intervener.kind == IntervenerKind::kLiveHuman) {
    throw Error(ErrorCode::kInvalidArgument, "live-human evaluation runs through `serve`");
  }
  base.intervener.noise_rate = a.noise_rate;
  base.intervener.validate();
  base.budget.max_steps_per_request = a.budget;
  base.agent_id = stem_or(a.agent, "scripted");
  base.help_policy_id = policy ? stem_or(a.policy, "policy") : a.policy;
  base.timestamp = a.timestamp.empty() ? utc_stamp() : a.timestamp;
  const std::string group = a.group.empty() ? base.help_policy_id : a.group;

  std::vector<GroupedResult> results;
  std::vector<std::pair<fs::path, EpisodeTrace>> traces;
  for (const EpisodeSpec& e : episodes) {
    RunConfig rc = base;
    rc.seed = mix_seed(a.seed, e.seed);
    EpisodeTrace t = run_episode(find_map(maps, e.map_id), e, agent, rc);
    std::string g = group;
    if (a.split_traps) g += is_trap_map(e.map_id) ? "/trap" : "/open";
    results.push_back({g, t.footer->result});
    if (!a.traces.empty()) {
      const fs::path p = fs::path(a.traces) / trace_file_name(t.header);
      traces.emplace_back(p, std::move(t));
    }
  }
  const std::vector<ReportRow> rows = aggregate(results);
  for (const auto& [path, t] : traces) write_trace(t, path);
  if (!a.report.empty()) write_file_atomic(a.report, report_csv(rows));
  print_report_table(std::cout, rows);
  return 0;
}

// --- replay / lint ----------------------------------------------------------

int replay_cmd(const std::string& maps_dir, const std::vector<std::string>& inputs) {
  const MapSet maps = load_map_dir(maps_dir);
  int failures = 0;
  for (const fs::path& p : trace_files(inputs)) {
    try {
      const EpisodeTrace t = read_trace(p);
      const EpisodeResult r = replay(t, find_map(maps, t.header.spec.map_id));
      std::cout << p.string() << ": ok success " << r.success << " spl " << r.spl
                << " human_contribution " << r.human_contribution << " hash " << std::hex
                << trace_hash(t) << std::dec << "\n";
    } catch (const Error& e) {
      ++failures;
      std::cout << p.string() << ": " << e.what() << "\n";
    }
  }
  return failures == 0 ? 0 : 1;
}

int lint_cmd(int budget, const std::vector<std::string>& inputs) {
  int violations = 0;
  std::size_t files = 0;
  for (const fs::path& p : trace_files(inputs)) {
    const EpisodeTrace t = read_trace(p);
    const int m = budget > 0 ? budget : t.header.budget;
    for (const BudgetViolation& v : lint_budget(t, m)) {
      ++violations;
      std::cout << p.string() << ": run of " << v.run_length << " non-agent steps from index "
                << v.first_index << " exceeds " << m << "\n";
    }
    ++files;
  }
  std::cout << files << " traces, " << violations << " violations\n";
  return violations == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Help-request training and evaluation for grid navigation agents"};
  app.require_subcommand(1);

  GenMapsArgs gm;
  auto* gen = app.add_subcommand("gen-maps", "Write fixture maps and the random suites");
  gen->add_option("--out", gm.out, "Output directory")->capture_default_str();
  gen->add_option("--seed,--train-seed", gm.train_seed, "Training suite seed")->capture_default_str();
  gen->add_option("--val-seed", gm.val_seed, "Validation suite seed")->capture_default_str();

  PretrainArgs pa;
  auto* pre = app.add_subcommand("pretrain-agent", "Train (or create) the frozen navigation agent");
  pre->add_option("--maps", pa.maps, "Map directory");
  pre->add_option("--out", pa.out)->capture_default_str();
  pre->add_option("--kind", pa.kind)->check(CLI::IsMember({"learned", "scripted"}))->capture_default_str();
  pre->add_option("--steps", pa.steps)->capture_default_str();
  pre->add_option("--seed", pa.seed)->capture_default_str();
  pre->add_option("--log", pa.log, "Training curve (JSONL)");

  auto add_serve_options = [](CLI::App* cmd, ServeArgs& s) {
    cmd->add_option("--maps", s.maps, "Map directory")->required();
    cmd->add_option("--episodes", s.episodes, "Episode file (JSONL)")->required();
    cmd->add_option("--agent", s.agent, "Agent file (default: scripted agent)");
    cmd->add_option("--address", s.address)->capture_default_str();
    cmd->add_option("--port", s.port)->capture_default_str();
    cmd->add_option("--budget", s.budget, "Steps per help request (M)")->capture_default_str();
    cmd->add_option("--timeout-s", s.timeout_s, "Operator response timeout")->capture_default_str();
    cmd->add_option("--step-delay-ms", s.step_delay_ms)->capture_default_str();
    cmd->add_option("--traces", s.traces, "Trace output directory")->capture_default_str();
    cmd->add_option("--static", s.static_dir, "Serve files from this directory over HTTP");
    cmd->add_option("--sessions", s.sessions, "Exit after this many sessions (0 = never)");
    cmd->add_option("--timestamp", s.timestamp, "Trace timestamp (default: now)");
  };

  RecordArgs ra;
  auto* rec = app.add_subcommand("record-demos", "Record demonstration traces");
  add_serve_options(rec, ra.serve);
  rec->add_flag("--scripted", ra.scripted, "Use the built-in stand-in demonstrator");
  rec->add_option("--count", ra.count, "Number of demonstrations")->capture_default_str();
  rec->add_option("--patience", ra.patience, "Scripted: non-improving steps before a takeover")
      ->capture_default_str();
  rec->add_option("--takeover", ra.takeover, "Scripted: actions per takeover")->capture_default_str();

  TrainBcArgs ba;
  auto* tbc = app.add_subcommand("train-bc", "Behavioural cloning from demonstrations");
  tbc->add_option("--demos", ba.demos, "Trace directory")->required();
  tbc->add_option("--maps", ba.maps)->required();
  tbc->add_option("--agent", ba.agent);
  tbc->add_option("--variant", ba.variant)->capture_default_str();
  tbc->add_option("--epochs", ba.epochs)->capture_default_str();
  tbc->add_option("--lr", ba.lr)->capture_default_str();
  tbc->add_option("--batch", ba.batch)->capture_default_str();
  tbc->add_option("--seed", ba.seed)->capture_default_str();
  tbc->add_option("--out", ba.out)->capture_default_str();
  tbc->add_option("--log", ba.log, "Loss log (default: <out>.loss.jsonl)");

  TrainPpoArgs ta;
  auto* tppo = app.add_subcommand("train-ppo", "PPO training of the help policy");
  tppo->add_option("--maps", ta.maps)->required();
  tppo->add_option("--episodes", ta.episodes)->required();
  tppo->add_option("--agent", ta.agent);
  tppo->add_option("--config", ta.config, "Training config (JSON)");
  tppo->add_option("--variant", ta.variant);
  tppo->add_option("--steps", ta.steps, "Total decisions");
  tppo->add_option("--budget", ta.budget);
  tppo->add_option("--seed", ta.seed);
  tppo->add_option("--out", ta.out)->capture_default_str();
  tppo->add_option("--log", ta.log, "Training log (default: <out>.log.jsonl)");

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "Run episodes and report metrics");
  ev->add_option("--maps", ea.maps)->required();
  ev->add_option("--episodes", ea.episodes)->required();
  ev->add_option("--agent", ea.agent);
  ev->add_option("--policy,--help-policy", ea.policy, "Weight file, `none` or `always`")
      ->capture_default_str();
  ev->add_option("--intervener", ea.intervener)->capture_default_str();
  ev->add_option("--noise-rate", ea.noise_rate)->capture_default_str();
  ev->add_option("--budget", ea.budget)->capture_default_str();
  ev->add_option("--mode", ea.mode)->check(CLI::IsMember({"argmax", "sample"}))->capture_default_str();
  ev->add_option("--seed", ea.seed)->capture_default_str();
  ev->add_option("--group", ea.group, "Report group name");
  ev->add_flag("--split-traps", ea.split_traps, "Separate rows for trap and open maps");
  ev->add_option("--report", ea.report, "CSV report path");
  ev->add_option("--traces", ea.traces, "Trace output directory");
  ev->add_option("--timestamp", ea.timestamp);

  std::string replay_maps;
  std::vector<std::string> replay_inputs;
  auto* rep = app.add_subcommand("replay", "Re-execute traces and check their results");
  rep->add_option("--maps", replay_maps)->required();
  rep->add_option("traces", replay_inputs, "Trace files or directories")->required();

  int lint_budget_m = 0;
  std::vector<std::string> lint_inputs;
  auto* lint = app.add_subcommand("lint", "Check traces for over-budget takeovers");
  lint->add_option("--budget", lint_budget_m, "M (default: each trace's header)");
  lint->add_option("traces", lint_inputs)->required();

  ServeArgs sa;
  auto* serve = app.add_subcommand("serve", "Evaluation sessions with a live operator");
  add_serve_options(serve, sa);
  serve->add_option("--policy,--help-policy", sa.policy, "Help policy weights");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) return gen_maps(gm);
    if (*pre) {
      if (pa.kind == "learned" && pa.maps.empty()) {
        throw Error(ErrorCode::kInvalidArgument, "--maps is required for a learned agent");
      }
      return pretrain(pa);
    }
    if (*rec) return record_demos(ra);
    if (*tbc) return train_bc(ba);
    if (*tppo) return train_ppo(ta);
    if (*ev) return eval(ea);
    if (*rep) return replay_cmd(replay_maps, replay_inputs);
    if (*lint) return lint_cmd(lint_budget_m, lint_inputs);
    if (*serve) return run_server(sa, SessionMode::kEvaluation);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
