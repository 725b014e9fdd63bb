#ifndef ASKNAV_METRICS_HPP_
#define ASKNAV_METRICS_HPP_

#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace asknav {

struct EpisodeResult {
  bool success = false;
  double shortest_path_length = 0.0;  // l, meters
  double actual_path_length = 0.0;    // p, meters
  int human_actions = 0;              // C_h
  int agent_actions = 0;              // C_a
  int help_requests = 0;              // C_r
  double spl = 0.0;
  double human_contribution = 0.0;

  friend bool operator==(const EpisodeResult&, const EpisodeResult&) = default;
};

nlohmann::json result_to_json(const EpisodeResult& r);
EpisodeResult result_from_json(const nlohmann::json& j);

// success * l / max(p, l). Throws NonPositiveShortestPath when l <= 0.
double spl(bool success, double shortest_path_length, double actual_path_length);

// C_h / (C_h + C_a). Throws ZeroSteps when no action was taken.
double human_contribution(int human_actions, int agent_actions);

// Fills spl and human_contribution from the raw counters.
EpisodeResult make_result(bool success, double shortest_path_length,
                          double actual_path_length, int human_actions,
                          int agent_actions, int help_requests);

struct ReportRow {
  std::string group;
  int n = 0;
  double spl = 0.0;
  double success = 0.0;
  double human_contribution = 0.0;
};

struct GroupedResult {
  std::string group;
  EpisodeResult result;
};

// Arithmetic means per group. Rows are sorted by group name so the output is
// independent of input order. Throws EmptyResults.
std::vector<ReportRow> aggregate(std::span<const GroupedResult> results);

inline constexpr const char* kReportHeader = "group,n,spl,success,human_contribution";

std::string report_csv(std::span<const ReportRow> rows);
void print_report_table(std::ostream& out, std::span<const ReportRow> rows);

}  // namespace asknav

#endif  // ASKNAV_METRICS_HPP_
