#include "asknav/session_server.hpp"

#include <deque>
#include <fstream>
#include <sstream>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "asknav/error.hpp"
#include "asknav/rng.hpp"
#include "asknav/runner.hpp"
#include "asknav/trace.hpp"

namespace asknav {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using nlohmann::json;

std::string_view to_string(SessionPhase phase) {
  switch (phase) {
    case SessionPhase::kAgentControl: return "AGENT_CONTROL";
    case SessionPhase::kAwaitingHuman: return "AWAITING_HUMAN";
    case SessionPhase::kHumanControl: return "HUMAN_CONTROL";
    case SessionPhase::kTerminated: return "TERMINATED";
  }
  return "?";
}

struct SessionServer::Impl {
  const MapSet* maps;
  std::vector<EpisodeSpec> episodes;
  const AgentPolicy* agent;
  const HelpPolicy* policy;
  ServeConfig config;

  net::io_context ioc;
  tcp::acceptor acceptor{ioc};
  std::size_t next_episode = 0;
  int started = 0;
  std::vector<SessionOutcome> outcomes;

  void accept();
  void finished(SessionOutcome outcome);
};

namespace {

const char* content_type(const std::filesystem::path& p) {
  const std::string ext = p.extension().string();
  if (ext == ".html") return "text/html";
  if (ext == ".js") return "text/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  return "application/octet-stream";
}

json pose_json(const Pose& p) {
  return {{"x", p.x}, {"y", p.y}, {"heading", std::string(to_string(p.heading))}};
}

class Session : public std::enable_shared_from_this<Session> {
 public:
  Session(SessionServer::Impl& server, tcp::socket socket, const EpisodeSpec& spec,
          int index)
      : server_(server),
        ws_(std::move(socket)),
        tick_(ws_.get_executor()),
        response_(ws_.get_executor()),
        map_(find_map(*server.maps, spec.map_id)),
        driver_(map_, spec, *server.agent,
                server.policy != nullptr ? server.policy->variant : FeatureVariant::kAll,
                RewardConfig{}) {
    TraceHeader& h = driver_.trace().header;
    h.agent_id = server.config.agent_id;
    h.help_policy_id = server.config.help_policy_id;
    h.budget = budget();
    h.intervener = IntervenerKind::kLiveHuman;
    h.mode = demo() ? "demonstration" : "evaluation";
    h.timestamp = server.config.timestamp + "-" + std::to_string(index);
    outcome_.map_id = spec.map_id;
    outcome_.seed = spec.seed;
    outcome_.trace_path = server.config.trace_dir / trace_file_name(h);
  }

  void start(http::request<http::string_body> request) {
    writer_.emplace(outcome_.trace_path, driver_.trace().header);
    driver_.set_writer(&*writer_);
    websocket::stream_base::timeout limits;
    limits.handshake_timeout = std::chrono::seconds(5);
    limits.idle_timeout = websocket::stream_base::none();
    limits.keep_alive_pings = false;
    ws_.set_option(limits);
    ws_.async_accept(request, [self = shared_from_this()](beast::error_code ec) {
      if (ec) return self->abort();
      self->send_state();
      self->read();
      self->schedule_tick();
    });
  }

 private:
  bool demo() const { return server_.config.mode == SessionMode::kDemonstration; }
  int budget() const { return server_.config.budget.max_steps_per_request; }

  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->abort();
      const std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      self->on_message(text);
      if (!self->closing_) self->read();
    });
  }

  void send(const json& j) {
    queue_.push_back(j.dump());
    if (queue_.size() == 1) write_next();
  }

  void write_next() {
    ws_.text(true);
    ws_.async_write(net::buffer(queue_.front()),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) {
                      if (ec) return self->abort();
                      self->queue_.pop_front();
                      if (!self->queue_.empty()) {
                        self->write_next();
                      } else if (self->closing_) {
                        self->close();
                      }
                    });
  }

  void send_state() {
    const EpisodeState& s = driver_.state();
    json j = {{"type", "state"},
              {"step", s.steps},
              {"pose", pose_json(s.pose)},
              {"goal", {{"x", s.goal.x}, {"y", s.goal.y}}},
              {"phase", std::string(to_string(phase_))},
              {"budget_remaining", budget_remaining_},
              {"distance_to_goal", s.distance_to_goal()},
              {"ask_probability", nullptr}};
    if (ask_probability_) j["ask_probability"] = *ask_probability_;
    if (first_frame_) {
      std::vector<int> blocked;
      for (int y = 0; y < map_.height(); ++y) {
        for (int x = 0; x < map_.width(); ++x) blocked.push_back(map_.is_blocked({x, y}) ? 1 : 0);
      }
      j["grid"] = {{"width", map_.width()}, {"height", map_.height()}, {"blocked", blocked}};
      first_frame_ = false;
    }
    send(j);
  }

  void schedule_tick() {
    if (phase_ != SessionPhase::kAgentControl || closing_) return;
    tick_.expires_after(server_.config.step_delay);
    tick_.async_wait([self = shared_from_this()](beast::error_code ec) {
      if (!ec) self->on_tick();
    });
  }

  void on_tick() {
    if (phase_ != SessionPhase::kAgentControl || closing_) return;
    if (pending_interrupt_ && driver_.can_request_help()) {
      pending_interrupt_ = false;
      take_over(false);
      return;
    }
    const EpisodeDriver::Decision d = driver_.prepare_decision();
    if (!demo() && server_.policy != nullptr && driver_.can_request_help()) {
      const HelpChoice choice = decide_help(
          *server_.policy, d.features, server_.config.decision,
          mix_seed(driver_.spec().seed, static_cast<std::uint64_t>(driver_.state().steps)));
      ask_probability_ = choice.ask_probability;
      if (choice.decision == HelpDecision::kAsk) {
        phase_ = SessionPhase::kAwaitingHuman;
        send({{"type", "help_request"}, {"step", driver_.state().steps}, {"max_steps", budget()}});
        send_state();
        response_.expires_after(server_.config.response_timeout);
        response_.async_wait([self = shared_from_this()](beast::error_code ec) {
          if (!ec) self->on_timeout();
        });
        return;
      }
    }
    agent_step(d);
  }

  void agent_step(const EpisodeDriver::Decision& d) {
    StepFlags flags;
    flags.ask_probability = ask_probability_;
    driver_.execute(d.agent.action, Actor::kAgent, flags);
    after_step();
    if (!closing_) schedule_tick();
  }

  // Starts operator control after an ASK (help_requested) or an interrupt.
  // The intervention itself starts with the first operator action so a
  // takeover released without acting leaves no request behind.
  void take_over(bool requested) {
    phase_ = SessionPhase::kHumanControl;
    budget_remaining_ = budget();
    first_flags_ = StepFlags{};
    if (requested) {
      first_flags_.help_requested = true;
    } else {
      first_flags_.interrupt = true;
    }
    ask_probability_.reset();
    send_state();
  }

  void human_step(Action action) {
    if (!driver_.intervention_active()) driver_.begin_intervention();
    StepFlags flags = first_flags_;
    first_flags_ = StepFlags{};
    driver_.execute(action, Actor::kHuman, flags);
    --budget_remaining_;
    after_step();
    if (!closing_ && budget_remaining_ == 0) release();
  }

  void release() {
    driver_.end_intervention();
    phase_ = SessionPhase::kAgentControl;
    budget_remaining_ = budget();
    send_state();
    schedule_tick();
  }

  void on_timeout() {
    if (phase_ != SessionPhase::kAwaitingHuman || closing_) return;
    driver_.begin_intervention();
    phase_ = SessionPhase::kHumanControl;
    ask_probability_.reset();
    const std::vector<Action> actions =
        provide_intervention(Intervener{IntervenerKind::kSimExpert, 0.0}, map_,
                             driver_.state(), server_.config.budget, 0);
    for (std::size_t i = 0; i < actions.size() && !driver_.terminated(); ++i) {
      StepFlags flags;
      flags.help_requested = i == 0;
      flags.fallback = true;
      driver_.execute(actions[i], Actor::kExpert, flags);
      budget_remaining_ = budget() - static_cast<int>(i) - 1;
      after_step();
    }
    if (!closing_) release();
  }

  // Sends the new state, or the result when the episode just ended.
  void after_step() {
    if (!driver_.terminated()) {
      send_state();
      return;
    }
    phase_ = SessionPhase::kTerminated;
    send_state();
    driver_.finish_trace();
    const EpisodeResult r = driver_.result();
    outcome_.completed = true;
    outcome_.result = r;
    send({{"type", "terminated"},
          {"result", {{"success", r.success}, {"spl", r.spl},
                      {"human_contribution", r.human_contribution}}}});
    shutdown();
  }

  void on_message(const std::string& text) {
    if (closing_) return;
    json msg;
    std::string type;
    try {
      msg = json::parse(text);
      type = msg.at("type").get<std::string>();
    } catch (const std::exception&) {
      return violation("malformed message");
    }
    if (type == "interrupt") {
      if (!demo()) return violation("interrupts are only accepted in demonstration mode");
      if (phase_ != SessionPhase::kAgentControl) return violation("interrupt while not under agent control");
      if (driver_.can_request_help()) {
        tick_.cancel();
        take_over(false);
      } else {
        pending_interrupt_ = true;
      }
    } else if (type == "action") {
      Action action;
      try {
        action = action_from_string(msg.at("action").get<std::string>());
      } catch (const std::exception&) {
        return violation("unknown action");
      }
      if (phase_ == SessionPhase::kAwaitingHuman) {
        response_.cancel();
        take_over(true);
      }
      if (phase_ != SessionPhase::kHumanControl) return violation("action without control");
      human_step(action);
    } else if (type == "release") {
      if (phase_ == SessionPhase::kAwaitingHuman) {
        response_.cancel();
        phase_ = SessionPhase::kAgentControl;
        agent_step(driver_.prepare_decision());
      } else if (phase_ == SessionPhase::kHumanControl) {
        release();
      } else {
        return violation("release without control");
      }
    } else if (type == "decline") {
      if (phase_ != SessionPhase::kAwaitingHuman) return violation("decline without a help request");
      response_.cancel();
      phase_ = SessionPhase::kAgentControl;
      agent_step(driver_.prepare_decision());
    } else {
      violation("unknown message type");
    }
  }

  void violation(const std::string& detail) {
    send({{"type", "error"}, {"code", "PROTOCOL"}, {"message", detail}});
    shutdown();
  }

  // Flushes queued frames, then closes the socket.
  void shutdown() {
    if (closing_) return;
    closing_ = true;
    tick_.cancel();
    response_.cancel();
    if (queue_.empty()) close();
  }

  // A client that never answers the close frame is cut off by the
  // handshake timeout.
  void close() {
    ws_.async_close(websocket::close_code::normal,
                    [self = shared_from_this()](beast::error_code) { self->done(); });
  }

  void abort() {
    closing_ = true;
    tick_.cancel();
    response_.cancel();
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().close(ec);
    done();
  }

  void done() {
    if (reported_) return;
    reported_ = true;
    server_.finished(outcome_);
  }

  SessionServer::Impl& server_;
  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  std::deque<std::string> queue_;
  net::steady_timer tick_;
  net::steady_timer response_;
  const GridMap& map_;
  EpisodeDriver driver_;
  std::optional<TraceWriter> writer_;
  SessionOutcome outcome_;
  SessionPhase phase_ = SessionPhase::kAgentControl;
  int budget_remaining_ = budget();
  StepFlags first_flags_;
  std::optional<double> ask_probability_;
  bool pending_interrupt_ = false;
  bool first_frame_ = true;
  bool closing_ = false;
  bool reported_ = false;
};

// Reads the first HTTP request of a connection and either upgrades it to a
// session or answers it from the static directory.
class Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(SessionServer::Impl& server, tcp::socket socket)
      : server_(server), stream_(std::move(socket)) {}

  void start() {
    http::async_read(stream_, buffer_, request_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) {
                       if (!ec) self->dispatch();
                     });
  }

 private:
  void dispatch() {
    if (websocket::is_upgrade(request_)) {
      const EpisodeSpec& spec =
          server_.episodes[server_.next_episode++ % server_.episodes.size()];
      try {
        auto session = std::make_shared<Session>(server_, stream_.release_socket(), spec,
                                                 server_.started++);
        session->start(std::move(request_));
      } catch (const std::exception&) {
        beast::error_code ignored;
        stream_.socket().close(ignored);
      }
      return;
    }
    auto response = std::make_shared<http::response<http::string_body>>();
    response->version(request_.version());
    response->keep_alive(false);
    const std::string target(request_.target());
    std::filesystem::path file;
    if (server_.config.static_dir && target.find("..") == std::string::npos) {
      file = *server_.config.static_dir / (target == "/" ? "index.html" : target.substr(1));
    }
    std::ifstream in(file, std::ios::binary);
    if (!file.empty() && in) {
      std::ostringstream body;
      body << in.rdbuf();
      response->result(http::status::ok);
      response->set(http::field::content_type, content_type(file));
      response->body() = body.str();
    } else {
      response->result(http::status::not_found);
      response->set(http::field::content_type, "text/plain");
      response->body() = "not found\n";
    }
    response->prepare_payload();
    http::async_write(stream_, *response,
                      [self = shared_from_this(), response](beast::error_code, std::size_t) {
                        beast::error_code ignored;
                        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
                      });
  }

  SessionServer::Impl& server_;
  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> request_;
};

}  // namespace

void SessionServer::Impl::accept() {
  acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
    if (ec) return;
    std::make_shared<Connection>(*this, std::move(socket))->start();
    accept();
  });
}

void SessionServer::Impl::finished(SessionOutcome outcome) {
  outcomes.push_back(std::move(outcome));
  if (config.max_sessions > 0 && static_cast<int>(outcomes.size()) >= config.max_sessions) {
    beast::error_code ignored;
    acceptor.close(ignored);
    ioc.stop();
  }
}

SessionServer::SessionServer(const MapSet& maps, std::vector<EpisodeSpec> episodes,
                             const AgentPolicy& agent, const HelpPolicy* help_policy,
                             ServeConfig config)
    : impl_(std::make_unique<Impl>()) {
  if (episodes.empty()) throw Error(ErrorCode::kInvalidArgument, "no episodes to serve");
  if (!agent.frozen) throw Error(ErrorCode::kFrozenViolation, "serving needs a frozen agent");
  if (config.budget.max_steps_per_request < 1) {
    throw Error(ErrorCode::kInvalidArgument, "budget must be at least 1");
  }
  for (const EpisodeSpec& e : episodes) find_map(maps, e.map_id);
  impl_->maps = &maps;
  impl_->episodes = std::move(episodes);
  impl_->agent = &agent;
  impl_->policy = help_policy;
  impl_->config = std::move(config);
  try {
    const tcp::endpoint endpoint(net::ip::make_address(impl_->config.address),
                                 impl_->config.port);
    impl_->acceptor.open(endpoint.protocol());
    impl_->acceptor.set_option(net::socket_base::reuse_address(true));
    impl_->acceptor.bind(endpoint);
    impl_->acceptor.listen();
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kBindFailure, impl_->config.address + ":" +
                                             std::to_string(impl_->config.port) + ": " +
                                             e.what());
  }
}

SessionServer::~SessionServer() = default;

unsigned short SessionServer::port() const {
  return impl_->acceptor.local_endpoint().port();
}

void SessionServer::run() {
  impl_->accept();
  impl_->ioc.run();
}

void SessionServer::stop() {
  net::post(impl_->ioc, [impl = impl_.get()] {
    beast::error_code ignored;
    impl->acceptor.close(ignored);
    impl->ioc.stop();
  });
}

const std::vector<SessionOutcome>& SessionServer::outcomes() const {
  return impl_->outcomes;
}

}  // namespace asknav
