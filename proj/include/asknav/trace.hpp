#ifndef ASKNAV_TRACE_HPP_
#define ASKNAV_TRACE_HPP_

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "asknav/expert.hpp"
#include "asknav/metrics.hpp"
#include "asknav/nav_env.hpp"

namespace asknav {

inline constexpr int kTraceFormatVersion = 1;

struct TraceHeader {
  EpisodeSpec spec;
  std::string agent_id;
  std::string help_policy_id;
  int budget = 25;  // M
  IntervenerKind intervener = IntervenerKind::kSimExpert;
  std::string mode = "evaluation";  // or "demonstration"
  std::string timestamp;
  int format_version = kTraceFormatVersion;
};

struct StepRecord {
  int index = 0;
  Pose pose_before;
  Action action = Action::kStop;
  Actor actor = Actor::kAgent;
  bool help_requested = false;  // first step after an ASK decision
  bool interrupt = false;       // first step of an operator takeover
  bool fallback = false;        // expert stood in for an unresponsive operator
  double distance_to_goal = 0.0;  // geodesic, meters, at pose_before
  std::optional<double> ask_probability;
};

struct TraceFooter {
  std::string status;  // "STOPPED" or "TIMEOUT"
  EpisodeResult result;
};

struct EpisodeTrace {
  TraceHeader header;
  std::vector<StepRecord> steps;
  std::optional<TraceFooter> footer;
};

// Appends in memory; the record index must continue the sequence.
void append_step(EpisodeTrace& trace, StepRecord record);

nlohmann::json spec_to_json(const EpisodeSpec& spec);
EpisodeSpec spec_from_json(const nlohmann::json& j);

nlohmann::json header_to_json(const TraceHeader& header);
nlohmann::json step_to_json(const StepRecord& record);
nlohmann::json footer_to_json(const TraceFooter& footer);

std::string trace_to_jsonl(const EpisodeTrace& trace);
EpisodeTrace trace_from_jsonl(std::string_view text);  // throws MalformedTrace
EpisodeTrace read_trace(const std::filesystem::path& path);
void write_trace(const EpisodeTrace& trace, const std::filesystem::path& path);

// {map_id}_{seed}_{timestamp}.jsonl
std::string trace_file_name(const TraceHeader& header);

// Streams a trace to disk one line per record, flushing before each append
// returns so a crash loses at most the record being written.
class TraceWriter {
 public:
  TraceWriter(const std::filesystem::path& path, const TraceHeader& header);

  void append(const StepRecord& record);
  void finish(const TraceFooter& footer);
  const EpisodeTrace& trace() const { return trace_; }

 private:
  void write_line(const nlohmann::json& j);

  std::ofstream out_;
  EpisodeTrace trace_;
};

// Re-executes the recorded actions and checks every pose and the footer.
// Throws ReplayDivergence on any mismatch, including a missing terminal.
EpisodeResult replay(const EpisodeTrace& trace, const GridMap& map);

// Hash of the step and footer records; the header timestamp is excluded so
// reruns with identical seeds hash equal.
std::uint64_t trace_hash(const EpisodeTrace& trace);

struct BudgetViolation {
  int first_index = 0;
  int run_length = 0;
};

// Runs of consecutive non-AGENT steps longer than `max_steps_per_request`.
std::vector<BudgetViolation> lint_budget(const EpisodeTrace& trace,
                                         int max_steps_per_request);

// Counts recomputed from the step records.
struct TraceCounts {
  int human_actions = 0;
  int agent_actions = 0;
  int help_requests = 0;
};
TraceCounts count_steps(const EpisodeTrace& trace);

}  // namespace asknav

#endif  // ASKNAV_TRACE_HPP_
