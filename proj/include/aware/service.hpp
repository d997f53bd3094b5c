#pragma once

// HTTP/JSON front end for exploration sessions.
//
//   POST   /sessions                                  {"dataset", "alpha"?, "eta"?, "omega"?, "policy"?}
//   GET    /sessions/{id}
//   GET    /sessions/{id}/events
//   POST   /sessions/{id}/visualizations              visualization spec
//   POST   /sessions/{id}/hypotheses                  test spec
//   PUT    /sessions/{id}/hypotheses/{hid}            test spec
//   DELETE /sessions/{id}/hypotheses/{hid}
//   POST   /sessions/{id}/hypotheses/{hid}/star       {"on": bool}
//   GET    /sessions/{id}/hypotheses/{hid}/flip?direction=to_reject|to_accept
//
// Datasets are read from <data_dir>/<name>.csv. Each session's event log is
// appended to <data_dir>/sessions/<id>.jsonl and reloaded on demand.

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <unordered_map>

#include <json.hpp>

#include "aware/session.hpp"

namespace httplib {
class Server;
}

namespace aware::service {

struct Response {
  int status = 200;
  nlohmann::json body;
};

class SessionService {
 public:
  explicit SessionService(std::filesystem::path data_dir);

  /// Routes one request. Never throws; errors become 4xx/5xx responses.
  Response handle(const std::string& method, const std::string& path,
                  const std::map<std::string, std::string>& query,
                  const std::string& body);

  /// Reads <data_dir>/sessions/<id>.jsonl back into a session.
  session::Session load(const std::string& id) const;

 private:
  struct Entry {
    std::shared_mutex mutex;
    std::unique_ptr<session::Session> session;
  };

  std::shared_ptr<Entry> find(const std::string& id);
  std::shared_ptr<const data::Dataset> dataset(const std::string& name) const;
  std::filesystem::path log_path(const std::string& id) const;
  void append_events(const session::Session& s, std::size_t from) const;

  Response create(const nlohmann::json& body);
  Response dispatch(const std::string& method, const std::string& id,
                    const std::string& rest,
                    const std::map<std::string, std::string>& query,
                    const nlohmann::json& body);

  std::filesystem::path data_dir_;
  std::mutex map_mutex_;
  std::unordered_map<std::string, std::shared_ptr<Entry>> sessions_;
};

/// Error class to HTTP status: not found 404, bad input 400, state 409.
int status_for(const std::exception& e);

class HttpServer {
 public:
  explicit HttpServer(SessionService& service);
  ~HttpServer();

  /// Binds to `port` (0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void listen();
  void stop();

 private:
  SessionService& service_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace aware::service
