#pragma once

#include "zsnav/serialize.hpp"
#include "zsnav/session.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace zsnav {

struct ApiResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

struct ServerEvent {
  long id = 0;
  std::string phase;  // retraining | layout | done | cancelled | error
  double percent = 0.0;
  std::string message;
  std::string job;

  Json to_json() const;
};

// Broadcast channel with full history; subscribers poll by last seen id.
class EventHub {
 public:
  long publish(ServerEvent event);
  // Events with id > after; waits up to `timeout` when none are pending.
  std::vector<ServerEvent> wait_after(long after, std::chrono::milliseconds timeout);
  long last_id() const;
  void close();
  bool closed() const;

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<ServerEvent> events_;
  long next_id_ = 1;
  bool closed_ = false;
};

struct ApiRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> params;
  std::string body;
  std::string request_id;  // X-Request-Id, may be empty
};

// HTTP-agnostic request handling over one live session.
class ApiService {
 public:
  explicit ApiService(std::unique_ptr<Session> session, std::optional<std::filesystem::path> save_dir = std::nullopt);
  ~ApiService();
  ApiService(const ApiService&) = delete;
  ApiService& operator=(const ApiService&) = delete;

  ApiResponse handle(const ApiRequest& request);

  EventHub& events() { return events_; }
  // Blocks until no commit job is running.
  void wait_idle();
  // Writes the session directory when one is configured.
  void flush();

 private:
  ApiResponse dispatch(const ApiRequest& request);
  ApiResponse state_json();
  ApiResponse start_commit(const Json& body);
  ApiResponse cancel_job();
  void run_job(std::string job_id, CommitJob job);
  void join_worker();

  std::unique_ptr<Session> session_;
  std::optional<std::filesystem::path> save_dir_;
  std::mutex mu_;  // guards session_, job state and the idempotency cache
  EventHub events_;
  std::thread worker_;
  std::string job_id_;
  bool job_running_ = false;
  std::condition_variable job_cv_;
  std::shared_ptr<std::atomic<bool>> cancel_;
  long job_counter_ = 0;
  std::map<std::string, ApiResponse> replies_;
  std::deque<std::string> reply_order_;
};

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
};

// "host:port", ":port" or "port".
ServeOptions parse_bind(const std::string& text);

class HttpServer {
 public:
  explicit HttpServer(ApiService& api);
  ~HttpServer();
  // Binds and serves on a background thread; returns the bound port.
  int start(const ServeOptions& options);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace zsnav
