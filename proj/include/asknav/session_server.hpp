#ifndef ASKNAV_SESSION_SERVER_HPP_
#define ASKNAV_SESSION_SERVER_HPP_

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "asknav/agent.hpp"
#include "asknav/expert.hpp"
#include "asknav/help_policy.hpp"
#include "asknav/metrics.hpp"
#include "asknav/nav_env.hpp"

namespace asknav {

enum class SessionMode : std::uint8_t { kDemonstration, kEvaluation };
enum class SessionPhase : std::uint8_t {
  kAgentControl,
  kAwaitingHuman,
  kHumanControl,
  kTerminated,
};

std::string_view to_string(SessionPhase phase);

struct ServeConfig {
  std::string address = "127.0.0.1";
  unsigned short port = 8765;  // 0 picks a free port
  SessionMode mode = SessionMode::kEvaluation;
  InterventionBudget budget;
  DecisionMode decision = DecisionMode::kArgmax;
  std::chrono::milliseconds response_timeout{60'000};
  std::chrono::milliseconds step_delay{250};
  std::filesystem::path trace_dir = "traces";
  std::optional<std::filesystem::path> static_dir;  // plain HTTP GETs
  int max_sessions = 0;  // stop after this many finished sessions; 0 = never
  std::string agent_id;
  std::string help_policy_id;
  std::string timestamp;  // used in trace file names
};

struct SessionOutcome {
  std::string map_id;
  std::uint64_t seed = 0;
  bool completed = false;  // false when the client left early
  std::filesystem::path trace_path;
  std::optional<EpisodeResult> result;
};

// WebSocket service; each connection runs the next episode of `episodes`
// (cycling) as one session. In evaluation mode the help policy, if any,
// decides when to ask; in demonstration mode only operator interrupts hand
// over control. Everything runs on the thread that calls run().
class SessionServer {
 public:
  // Binds immediately; throws BindFailure.
  SessionServer(const MapSet& maps, std::vector<EpisodeSpec> episodes,
                const AgentPolicy& agent, const HelpPolicy* help_policy,
                ServeConfig config);
  ~SessionServer();

  SessionServer(const SessionServer&) = delete;
  SessionServer& operator=(const SessionServer&) = delete;

  unsigned short port() const;

  // Serves until stop() or until max_sessions sessions have finished.
  void run();
  // Safe to call from any thread.
  void stop();

  // Finished sessions in completion order; read after run() returns.
  const std::vector<SessionOutcome>& outcomes() const;

 struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace asknav

#endif  // ASKNAV_SESSION_SERVER_HPP_
