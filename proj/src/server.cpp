#include "zsnav/server.hpp"

#include <httplib.h>

#include <charconv>

namespace zsnav {

Json ServerEvent::to_json() const {
  return Json{{"id", id}, {"phase", phase}, {"percent", percent}, {"message", message}, {"job", job}};
}

long EventHub::publish(ServerEvent event) {
  long id;
  {
    std::lock_guard lock(mu_);
    event.id = id = next_id_++;
    events_.push_back(std::move(event));
    if (events_.size() > 10000) events_.pop_front();
  }
  cv_.notify_all();
  return id;
}

std::vector<ServerEvent> EventHub::wait_after(long after, std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  cv_.wait_for(lock, timeout, [&] { return closed_ || next_id_ - 1 > after; });
  std::vector<ServerEvent> out;
  for (const auto& e : events_)
    if (e.id > after) out.push_back(e);
  return out;
}

long EventHub::last_id() const {
  std::lock_guard lock(mu_);
  return next_id_ - 1;
}

void EventHub::close() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

bool EventHub::closed() const {
  std::lock_guard lock(mu_);
  return closed_;
}

namespace {

ApiResponse json_reply(int status, const Json& body) { return {status, body.dump(), "application/json"}; }

ApiResponse error_reply(int status, const std::string& message) {
  return json_reply(status, Json{{"error", message}, {"status", status}});
}

int status_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument:
    case ErrorKind::parse: return 400;
    case ErrorKind::not_found: return 404;
    case ErrorKind::phase:
    case ErrorKind::conflict: return 409;
    case ErrorKind::io: return 500;
  }
  return 500;
}

Json parse_body(const std::string& body) {
  if (body.empty()) return Json::object();
  try {
    Json j = Json::parse(body);
    if (!j.is_object()) fail(ErrorKind::parse, "request body must be a JSON object");
    return j;
  } catch (const Json::parse_error& e) {
    fail(ErrorKind::parse, std::string("invalid JSON body: ") + e.what());
  }
}

std::string param(const ApiRequest& r, const std::string& key) {
  auto it = r.params.find(key);
  if (it == r.params.end() || it->second.empty()) fail(ErrorKind::invalid_argument, "missing query parameter '" + key + "'");
  return it->second;
}

}  // namespace

ApiService::ApiService(std::unique_ptr<Session> session, std::optional<std::filesystem::path> save_dir)
    : session_(std::move(session)), save_dir_(std::move(save_dir)) {
  require(session_ != nullptr, "service needs a session");
}

ApiService::~ApiService() {
  {
    std::lock_guard lock(mu_);
    if (cancel_) cancel_->store(true);
  }
  join_worker();
  events_.close();
}

void ApiService::join_worker() {
  if (worker_.joinable()) worker_.join();
}

void ApiService::wait_idle() {
  std::unique_lock lock(mu_);
  job_cv_.wait(lock, [&] { return !job_running_; });
}

void ApiService::flush() {
  std::lock_guard lock(mu_);
  if (save_dir_) session_->save(*save_dir_);
}

ApiResponse ApiService::handle(const ApiRequest& req) {
  const bool mutating = req.method == "POST";
  const std::string key = req.method + " " + req.path + " " + req.request_id;
  if (mutating && !req.request_id.empty()) {
    std::lock_guard lock(mu_);
    if (auto it = replies_.find(key); it != replies_.end()) return it->second;
  }
  ApiResponse resp;
  try {
    resp = dispatch(req);
  } catch (const Error& e) {
    resp = error_reply(status_of(e.kind()), e.what());
  } catch (const Json::exception& e) {
    resp = error_reply(400, std::string("bad request: ") + e.what());
  } catch (const std::exception& e) {
    resp = error_reply(500, e.what());
  }
  if (mutating && !req.request_id.empty() && resp.status < 500) {
    std::lock_guard lock(mu_);
    replies_[key] = resp;
    reply_order_.push_back(key);
    if (reply_order_.size() > 1000) {
      replies_.erase(reply_order_.front());
      reply_order_.pop_front();
    }
  }
  return resp;
}

ApiResponse ApiService::state_json() {
  const Session& s = *session_;
  const FeatureDataset& ds = s.dataset();
  Json classes = Json::array(), seen = Json::array(), unseen = Json::array();
  for (int c = 0; c < ds.n_classes(); ++c)
    classes.push_back(Json{{"index", c}, {"name", ds.class_names[static_cast<size_t>(c)]}, {"seen", ds.is_seen(c)}});
  for (int c : ds.seen_classes) seen.push_back(ds.class_names[static_cast<size_t>(c)]);
  for (int c : ds.unseen_classes) unseen.push_back(ds.class_names[static_cast<size_t>(c)]);
  Json j{{"phase", to_string(s.phase())},
         {"attribute_count", s.matrix().n_attributes()},
         {"attributes", s.matrix().attribute_names()},
         {"classes", classes},
         {"seen", seen},
         {"unseen", unseen},
         {"d", s.space().dim()},
         {"iteration_tag", s.iteration_tag()},
         {"has_model", s.model().has_value()},
         {"has_layout", s.layout() != nullptr},
         {"metrics_count", s.metrics().size()},
         {"warnings", s.warnings()},
         {"draft", nullptr},
         {"job", nullptr}};
  if (s.draft()) j["draft"] = draft_to_json(*s.draft(), ds);
  if (!job_id_.empty()) j["job"] = Json{{"id", job_id_}, {"running", job_running_}};
  return json_reply(200, j);
}

ApiResponse ApiService::dispatch(const ApiRequest& req) {
  const std::string& p = req.path;
  std::lock_guard lock(mu_);
  Session& s = *session_;
  const FeatureDataset& ds = s.dataset();

  if (req.method == "GET") {
    if (p == "/api/state") return state_json();
    if (p == "/api/hints") {
      Json list = Json::array();
      for (size_t i = 0; i < s.hints().size(); ++i) list.push_back(hint_to_json(s.hints()[i], static_cast<int>(i), ds));
      return json_reply(200, Json{{"hints", list}, {"attribute_count", s.matrix().n_attributes()}});
    }
    if (p == "/api/layout") {
      if (!s.layout()) fail(ErrorKind::not_found, "layouts are disabled for this session");
      return json_reply(200, layout_to_json(*s.layout(), ds, s.trajectories()));
    }
    if (p.rfind("/api/trajectories/", 0) == 0) {
      const int cls = resolve_class(httplib::detail::decode_url(p.substr(18), false), ds);
      if (!ds.is_seen(cls)) fail(ErrorKind::not_found, "trajectories exist for seen classes only");
      auto it = s.trajectories().find(cls);
      Trajectory t = it != s.trajectories().end() ? it->second : Trajectory{cls, {}};
      return json_reply(200, trajectory_to_json(t, ds));
    }
    if (p == "/api/neighbors") {
      const std::string kind = param(req, "kind");
      Session::PointKind pk;
      if (kind == "exemplar") pk = Session::PointKind::exemplar;
      else if (kind == "prototype") pk = Session::PointKind::prototype;
      else fail(ErrorKind::invalid_argument, "kind must be exemplar or prototype");
      const int cls = resolve_class(param(req, "class"), ds);
      long k = 5;
      if (auto it = req.params.find("k"); it != req.params.end()) {
        const auto [ptr, ec] = std::from_chars(it->second.data(), it->second.data() + it->second.size(), k);
        if (ec != std::errc() || ptr != it->second.data() + it->second.size() || k < 1)
          fail(ErrorKind::invalid_argument, "k must be a positive integer");
      }
      Json list = Json::array();
      for (Index row : s.neighbors(pk, cls, k)) {
        const int c = ds.class_of[static_cast<size_t>(row)];
        Json n{{"row", row}, {"id", ds.instance_ids[static_cast<size_t>(row)]}, {"class", ds.class_names[static_cast<size_t>(c)]}};
        if (!ds.image_paths.empty()) n["image"] = ds.image_paths[static_cast<size_t>(row)];
        list.push_back(std::move(n));
      }
      return json_reply(200, Json{{"class", ds.class_names[static_cast<size_t>(cls)]}, {"kind", kind}, {"neighbors", list}});
    }
    if (p == "/api/metrics") return json_reply(200, Json{{"metrics", metrics_to_json(s.metrics())}});
    if (p == "/api/matrix") return {200, format_binary_table(matrix_to_table(s.matrix(), ds)), "text/csv"};
    if (p == "/api/pattern") {
      const int a = resolve_class(param(req, "a"), ds), b = resolve_class(param(req, "b"), ds);
      return json_reply(200, pattern_to_json(s.pattern(a, b), ds));
    }
  } else if (req.method == "POST") {
    const Json body = parse_body(req.body);
    if (p == "/api/draft") {
      if (!body.contains("fixed")) fail(ErrorKind::invalid_argument, "draft needs 'fixed'");
      std::optional<int> hint;
      if (body.contains("hint_id") && !body.at("hint_id").is_null()) hint = body.at("hint_id").get<int>();
      return json_reply(200, draft_to_json(s.begin_draft(labels_from_json(body.at("fixed"), ds), hint), ds));
    }
    if (p == "/api/draft/feedback") {
      if (!body.contains("edits")) fail(ErrorKind::invalid_argument, "feedback needs 'edits'");
      return json_reply(200, draft_to_json(s.feedback(labels_from_json(body.at("edits"), ds)), ds));
    }
    if (p == "/api/draft/reverse") return json_reply(200, draft_to_json(s.reverse_draft(), ds));
    if (p == "/api/commit") return start_commit(body);
    if (p == "/api/undo") {
      s.undo_last_commit();
      if (save_dir_) s.save(*save_dir_);
      return state_json();
    }
    if (p == "/api/cancel") return cancel_job();
  } else {
    return error_reply(405, "method not allowed");
  }
  return error_reply(404, "no route for " + req.method + " " + p);
}

ApiResponse ApiService::start_commit(const Json& body) {
  Session& s = *session_;
  if (job_running_) fail(ErrorKind::phase, "a commit job is already running");
  if (!body.contains("name") || !body.at("name").is_string()) fail(ErrorKind::invalid_argument, "commit needs a string 'name'");
  const auto unseen = binary_labels_from_json(body.value("unseen_labels", Json::object()), s.dataset());
  CommitJob job = s.prepare_commit(body.at("name").get<std::string>(), unseen);
  join_worker();
  job_id_ = "job-" + std::to_string(++job_counter_);
  job_running_ = true;
  cancel_ = std::make_shared<std::atomic<bool>>(false);
  worker_ = std::thread(&ApiService::run_job, this, job_id_, std::move(job));
  return json_reply(202, Json{{"job", job_id_}, {"status", "accepted"}});
}

ApiResponse ApiService::cancel_job() {
  if (!job_running_ || !cancel_) fail(ErrorKind::phase, "no running job to cancel");
  cancel_->store(true);
  return json_reply(202, Json{{"job", job_id_}, {"status", "cancelling"}});
}

void ApiService::run_job(std::string job_id, CommitJob job) {
  std::shared_ptr<std::atomic<bool>> cancel;
  {
    std::lock_guard lock(mu_);
    cancel = cancel_;
  }
  auto progress = [&](const std::string& stage, double pct) { events_.publish({0, stage, pct, "", job_id}); };
  std::string error;
  CommitResult result;
  try {
    result = Session::compute_commit(std::move(job), progress, cancel.get());
  } catch (const std::exception& e) {
    error = e.what();
  }
  bool cancelled = false;
  {
    std::lock_guard lock(mu_);
    try {
      if (!error.empty()) {
        session_->abort_commit(error);
      } else {
        cancelled = result.cancelled;
        session_->finish_commit(std::move(result));
        if (!cancelled && save_dir_) session_->save(*save_dir_);
      }
    } catch (const std::exception& e) {
      if (error.empty()) error = e.what();
    }
    job_running_ = false;
  }
  if (!error.empty()) events_.publish({0, "error", 100.0, error, job_id});
  else if (cancelled) events_.publish({0, "cancelled", 100.0, "job cancelled", job_id});
  else events_.publish({0, "done", 100.0, "", job_id});
  job_cv_.notify_all();
}

ServeOptions parse_bind(const std::string& text) {
  ServeOptions o;
  const auto colon = text.rfind(':');
  std::string port = text;
  if (colon != std::string::npos) {
    if (colon > 0) o.host = text.substr(0, colon);
    port = text.substr(colon + 1);
  }
  int value = -1;
  const auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
  if (ec != std::errc() || ptr != port.data() + port.size() || value < 0 || value > 65535)
    fail(ErrorKind::invalid_argument, "bad bind address '" + text + "'");
  o.port = value;
  return o;
}

struct HttpServer::Impl {
  ApiService& api;
  httplib::Server server;
  std::thread thread;
  explicit Impl(ApiService& a) : api(a) {}
};

HttpServer::HttpServer(ApiService& api) : impl_(std::make_unique<Impl>(api)) {
  auto& srv = impl_->server;
  ApiService& svc = api;
  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"}});

  srv.Get("/api/events", [&svc](const httplib::Request& req, httplib::Response& res) {
    long after = svc.events().last_id();
    if (req.has_param("after")) after = std::stol(req.get_param_value("after"));
    else if (req.has_header("Last-Event-ID")) after = std::stol(req.get_header_value("Last-Event-ID"));
    auto cursor = std::make_shared<long>(after);
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider("text/event-stream", [&svc, cursor](size_t, httplib::DataSink& sink) {
      const auto batch = svc.events().wait_after(*cursor, std::chrono::milliseconds(500));
      if (batch.empty()) {
        if (svc.events().closed()) {
          sink.done();
          return true;
        }
        const std::string ping = ": keepalive\n\n";
        return sink.write(ping.data(), ping.size());
      }
      for (const auto& e : batch) {
        const std::string frame =
            "id: " + std::to_string(e.id) + "\nevent: progress\ndata: " + e.to_json().dump() + "\n\n";
        if (!sink.write(frame.data(), frame.size())) return false;
        *cursor = e.id;
      }
      return true;
    });
  });

  auto forward = [&svc](const httplib::Request& req, httplib::Response& res) {
    ApiRequest r;
    r.method = req.method;
    r.path = req.path;
    for (const auto& [k, v] : req.params) r.params.emplace(k, v);
    r.body = req.body;
    r.request_id = req.get_header_value("X-Request-Id");
    const ApiResponse out = svc.handle(r);
    res.status = out.status;
    res.set_content(out.body, out.content_type);
  };
  srv.Get(R"(/api/.*)", forward);
  srv.Post(R"(/api/.*)", forward);
  srv.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type, X-Request-Id");
    res.status = 204;
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const ServeOptions& opt) {
  auto& srv = impl_->server;
  int port = opt.port;
  if (port == 0) {
    port = srv.bind_to_any_port(opt.host);
    if (port < 0) fail(ErrorKind::io, "cannot bind " + opt.host);
  } else if (!srv.bind_to_port(opt.host, port)) {
    fail(ErrorKind::io, "cannot bind " + opt.host + ":" + std::to_string(port));
  }
  impl_->thread = std::thread([&srv] { srv.listen_after_bind(); });
  return port;
}

void HttpServer::stop() {
  if (!impl_) return;
  impl_->api.events().close();
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace zsnav
