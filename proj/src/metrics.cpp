#include "asknav/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <map>
#include <sstream>

#include "asknav/error.hpp"

namespace asknav {

nlohmann::json result_to_json(const EpisodeResult& r) {
  return {{"success", r.success},
          {"shortest_path_length", r.shortest_path_length},
          {"actual_path_length", r.actual_path_length},
          {"human_actions", r.human_actions},
          {"agent_actions", r.agent_actions},
          {"help_requests", r.help_requests},
          {"spl", r.spl},
          {"human_contribution", r.human_contribution}};
}

EpisodeResult result_from_json(const nlohmann::json& j) {
  EpisodeResult r;
  r.success = j.at("success").get<bool>();
  r.shortest_path_length = j.at("shortest_path_length").get<double>();
  r.actual_path_length = j.at("actual_path_length").get<double>();
  r.human_actions = j.at("human_actions").get<int>();
  r.agent_actions = j.at("agent_actions").get<int>();
  r.help_requests = j.at("help_requests").get<int>();
  r.spl = j.at("spl").get<double>();
  r.human_contribution = j.at("human_contribution").get<double>();
  return r;
}

double spl(bool success, double shortest_path_length, double actual_path_length) {
  if (!(shortest_path_length > 0.0)) {
    throw Error(ErrorCode::kNonPositiveShortestPath,
                "shortest path length must be positive");
  }
  if (actual_path_length < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "negative path length");
  }
  if (!success) return 0.0;
  return shortest_path_length / std::max(actual_path_length, shortest_path_length);
}

double human_contribution(int human_actions, int agent_actions) {
  if (human_actions + agent_actions <= 0) {
    throw Error(ErrorCode::kZeroSteps, "no actions taken");
  }
  return static_cast<double>(human_actions) /
         static_cast<double>(human_actions + agent_actions);
}

EpisodeResult make_result(bool success, double shortest_path_length,
                          double actual_path_length, int human_actions,
                          int agent_actions, int help_requests) {
  EpisodeResult r;
  r.success = success;
  r.shortest_path_length = shortest_path_length;
  r.actual_path_length = actual_path_length;
  r.human_actions = human_actions;
  r.agent_actions = agent_actions;
  r.help_requests = help_requests;
  r.spl = spl(success, shortest_path_length, actual_path_length);
  r.human_contribution = human_contribution(human_actions, agent_actions);
  return r;
}

std::vector<ReportRow> aggregate(std::span<const GroupedResult> results) {
  if (results.empty()) throw Error(ErrorCode::kEmptyResults, "nothing to aggregate");
  struct Sums {
    int n = 0;
    double spl = 0.0;
    double success = 0.0;
    double contribution = 0.0;
  };
  std::map<std::string, Sums> groups;
  for (const GroupedResult& g : results) {
    Sums& s = groups[g.group];
    ++s.n;
    s.spl += g.result.spl;
    s.success += g.result.success ? 1.0 : 0.0;
    s.contribution += g.result.human_contribution;
  }
  std::vector<ReportRow> rows;
  for (const auto& [group, s] : groups) {
    rows.push_back({group, s.n, s.spl / s.n, s.success / s.n, s.contribution / s.n});
  }
  return rows;
}

std::string report_csv(std::span<const ReportRow> rows) {
  std::ostringstream out;
  out << kReportHeader << '\n';
  out << std::setprecision(6);
  for (const ReportRow& r : rows) {
    out << r.group << ',' << r.n << ',' << r.spl << ',' << r.success << ','
        << r.human_contribution << '\n';
  }
  return out.str();
}

void print_report_table(std::ostream& out, std::span<const ReportRow> rows) {
  std::size_t width = 5;
  for (const ReportRow& r : rows) width = std::max(width, r.group.size());
  out << std::left << std::setw(static_cast<int>(width)) << "group" << std::right
      << std::setw(6) << "n" << std::setw(9) << "SPL" << std::setw(9) << "success"
      << std::setw(14) << "human_contrib" << '\n';
  out << std::fixed << std::setprecision(3);
  for (const ReportRow& r : rows) {
    out << std::left << std::setw(static_cast<int>(width)) << r.group << std::right
        << std::setw(6) << r.n << std::setw(9) << r.spl << std::setw(9) << r.success
        << std::setw(14) << r.human_contribution << '\n';
  }
  out.unsetf(std::ios::fixed);
}

}  // namespace asknav
