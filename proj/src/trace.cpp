#include "asknav/trace.hpp"

#include <sstream>

#include "asknav/error.hpp"
#include "asknav/nnet.hpp"

namespace asknav {

void append_step(EpisodeTrace& trace, StepRecord record) {
  const int expected = static_cast<int>(trace.steps.size());
  if (record.index != expected) {
    throw Error(ErrorCode::kIndexGap, "expected step index " +
                                          std::to_string(expected) + ", got " +
                                          std::to_string(record.index));
  }
  trace.steps.push_back(std::move(record));
}

nlohmann::json spec_to_json(const EpisodeSpec& spec) {
  return {{"map_id", spec.map_id},
          {"start",
           {{"x", spec.start.x},
            {"y", spec.start.y},
            {"heading", std::string(to_string(spec.start.heading))}}},
          {"goal", {{"x", spec.goal.x}, {"y", spec.goal.y}}},
          {"shortest_path_length", spec.shortest_path_length},
          {"max_steps", spec.max_steps},
          {"seed", spec.seed}};
}

EpisodeSpec spec_from_json(const nlohmann::json& j) {
  EpisodeSpec s;
  s.map_id = j.at("map_id").get<std::string>();
  s.start.x = j.at("start").at("x").get<int>();
  s.start.y = j.at("start").at("y").get<int>();
  s.start.heading = heading_from_string(j.at("start").at("heading").get<std::string>());
  s.goal.x = j.at("goal").at("x").get<int>();
  s.goal.y = j.at("goal").at("y").get<int>();
  s.shortest_path_length = j.at("shortest_path_length").get<double>();
  s.max_steps = j.at("max_steps").get<int>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

namespace {

nlohmann::json pose_to_json(const Pose& p) {
  return {{"x", p.x}, {"y", p.y}, {"heading", std::string(to_string(p.heading))}};
}

Pose pose_from_json(const nlohmann::json& j) {
  return {j.at("x").get<int>(), j.at("y").get<int>(),
          heading_from_string(j.at("heading").get<std::string>())};
}

StepRecord step_from_json(const nlohmann::json& j) {
  StepRecord r;
  r.index = j.at("index").get<int>();
  r.pose_before = pose_from_json(j.at("pose_before"));
  r.action = action_from_string(j.at("action").get<std::string>());
  r.actor = actor_from_string(j.at("actor").get<std::string>());
  r.help_requested = j.at("help_requested").get<bool>();
  r.interrupt = j.at("interrupt").get<bool>();
  r.fallback = j.value("fallback", false);
  r.distance_to_goal = j.at("distance_to_goal").get<double>();
  if (j.contains("ask_probability") && !j.at("ask_probability").is_null()) {
    r.ask_probability = j.at("ask_probability").get<double>();
  }
  return r;
}

}  // namespace

nlohmann::json header_to_json(const TraceHeader& h) {
  return {{"type", "header"},
          {"format_version", h.format_version},
          {"spec", spec_to_json(h.spec)},
          {"agent_id", h.agent_id},
          {"help_policy_id", h.help_policy_id},
          {"budget", h.budget},
          {"intervener", std::string(to_string(h.intervener))},
          {"mode", h.mode},
          {"timestamp", h.timestamp}};
}

nlohmann::json step_to_json(const StepRecord& r) {
  nlohmann::json j = {{"type", "step"},
                      {"index", r.index},
                      {"pose_before", pose_to_json(r.pose_before)},
                      {"action", std::string(to_string(r.action))},
                      {"actor", std::string(to_string(r.actor))},
                      {"help_requested", r.help_requested},
                      {"interrupt", r.interrupt},
                      {"distance_to_goal", r.distance_to_goal}};
  if (r.fallback) j["fallback"] = true;
  if (r.ask_probability) j["ask_probability"] = *r.ask_probability;
  return j;
}

nlohmann::json footer_to_json(const TraceFooter& f) {
  return {{"type", "footer"}, {"status", f.status}, {"result", result_to_json(f.result)}};
}

std::string trace_to_jsonl(const EpisodeTrace& trace) {
  std::string out = header_to_json(trace.header).dump() + "\n";
  for (const StepRecord& r : trace.steps) out += step_to_json(r).dump() + "\n";
  if (trace.footer) out += footer_to_json(*trace.footer).dump() + "\n";
  return out;
}

EpisodeTrace trace_from_jsonl(std::string_view text) {
  EpisodeTrace trace;
  bool have_header = false;
  std::size_t pos = 0;
  int line_no = 0;
  try {
    while (pos < text.size()) {
      std::size_t end = text.find('\n', pos);
      if (end == std::string_view::npos) end = text.size();
      std::string_view line = text.substr(pos, end - pos);
      pos = end + 1;
      ++line_no;
      if (line.empty()) continue;
      const nlohmann::json j = nlohmann::json::parse(line);
      const std::string type = j.at("type").get<std::string>();
      if (!have_header) {
        if (type != "header") throw Error(ErrorCode::kMalformedTrace, "first line is not a header");
        TraceHeader& h = trace.header;
        h.format_version = j.at("format_version").get<int>();
        if (h.format_version != kTraceFormatVersion) {
          throw Error(ErrorCode::kMalformedTrace, "unsupported format_version");
        }
        h.spec = spec_from_json(j.at("spec"));
        h.agent_id = j.value("agent_id", "");
        h.help_policy_id = j.value("help_policy_id", "");
        h.budget = j.at("budget").get<int>();
        h.intervener = intervener_from_string(j.at("intervener").get<std::string>());
        h.mode = j.value("mode", "evaluation");
        h.timestamp = j.value("timestamp", "");
        have_header = true;
      } else if (trace.footer) {
        throw Error(ErrorCode::kMalformedTrace, "records after footer");
      } else if (type == "step") {
        append_step(trace, step_from_json(j));
      } else if (type == "footer") {
        trace.footer = TraceFooter{j.at("status").get<std::string>(),
                                   result_from_json(j.at("result"))};
      } else {
        throw Error(ErrorCode::kMalformedTrace, "unknown record type " + type);
      }
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kMalformedTrace) throw;
    throw Error(ErrorCode::kMalformedTrace,
                "line " + std::to_string(line_no) + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kMalformedTrace,
                "line " + std::to_string(line_no) + ": " + e.what());
  }
  if (!have_header) throw Error(ErrorCode::kMalformedTrace, "empty trace");
  return trace;
}

EpisodeTrace read_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return trace_from_jsonl(buffer.str());
}

void write_trace(const EpisodeTrace& trace, const std::filesystem::path& path) {
  write_file_atomic(path, trace_to_jsonl(trace));
}

std::string trace_file_name(const TraceHeader& header) {
  return header.spec.map_id + "_" + std::to_string(header.spec.seed) + "_" +
         header.timestamp + ".jsonl";
}

TraceWriter::TraceWriter(const std::filesystem::path& path, const TraceHeader& header) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  trace_.header = header;
  write_line(header_to_json(header));
}

void TraceWriter::write_line(const nlohmann::json& j) {
  out_ << j.dump() << '\n';
  out_.flush();
  if (!out_) throw Error(ErrorCode::kIo, "trace write failed");
}

void TraceWriter::append(const StepRecord& record) {
  if (trace_.footer) throw Error(ErrorCode::kMalformedTrace, "append after footer");
  append_step(trace_, record);
  write_line(step_to_json(record));
}

void TraceWriter::finish(const TraceFooter& footer) {
  if (trace_.footer) throw Error(ErrorCode::kMalformedTrace, "footer already written");
  trace_.footer = footer;
  write_line(footer_to_json(footer));
}

TraceCounts count_steps(const EpisodeTrace& trace) {
  TraceCounts c;
  for (const StepRecord& r : trace.steps) {
    if (r.actor == Actor::kAgent) {
      ++c.agent_actions;
    } else {
      ++c.human_actions;
    }
    if (r.help_requested || r.interrupt) ++c.help_requests;
  }
  return c;
}

EpisodeResult replay(const EpisodeTrace& trace, const GridMap& map) {
  auto diverge = [](const std::string& why) {
    throw Error(ErrorCode::kReplayDivergence, why);
  };
  if (trace.steps.empty()) diverge("trace has no steps, so no terminal");
  if (!trace.footer) diverge("trace has no footer");
  if (trace.header.spec.map_id != map.map_id()) diverge("map does not match header");
  EpisodeState state;
  try {
    state = start_episode(map, trace.header.spec);
  } catch (const Error& e) {
    diverge(std::string("cannot start episode: ") + e.what());
  }
  for (const StepRecord& r : trace.steps) {
    if (state.terminated) diverge("steps recorded after termination");
    if (!(r.pose_before == state.pose)) {
      diverge("pose mismatch at step " + std::to_string(r.index));
    }
    if (r.distance_to_goal != state.distance_to_goal()) {
      diverge("distance mismatch at step " + std::to_string(r.index));
    }
    step(map, state, r.action, r.actor);
  }
  if (!state.terminated) diverge("episode did not terminate");
  const TraceCounts counts = count_steps(trace);
  const EpisodeResult result =
      make_result(is_success(state), trace.header.spec.shortest_path_length,
                  state.path_length, state.human_actions, state.agent_actions,
                  counts.help_requests);
  if (!(result == trace.footer->result)) diverge("recomputed result differs from footer");
  const std::string status = state.stopped ? "STOPPED" : "TIMEOUT";
  if (status != trace.footer->status) diverge("terminal status differs from footer");
  return result;
}

std::uint64_t trace_hash(const EpisodeTrace& trace) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  nlohmann::json header = header_to_json(trace.header);
  header.erase("timestamp");
  feed(header.dump());
  for (const StepRecord& r : trace.steps) feed(step_to_json(r).dump());
  if (trace.footer) feed(footer_to_json(*trace.footer).dump());
  return h;
}

std::vector<BudgetViolation> lint_budget(const EpisodeTrace& trace,
                                         int max_steps_per_request) {
  std::vector<BudgetViolation> violations;
  int run = 0;
  int first = 0;
  auto close_run = [&] {
    if (run > max_steps_per_request) violations.push_back({first, run});
    run = 0;
  };
  for (const StepRecord& r : trace.steps) {
    if (r.actor == Actor::kAgent) {
      close_run();
      continue;
    }
    if (run == 0) first = r.index;
    ++run;
  }
  close_run();
  return violations;
}

}  // namespace asknav
