#include "aware/service.hpp"

#include <httplib.h>

#include <fstream>
#include <iomanip>
#include <random>
#include <regex>
#include <sstream>

#include "aware/errors.hpp"
#include "aware/json_io.hpp"

using nlohmann::json;

namespace aware::service {
namespace {

std::string random_id() {
  static std::mutex mutex;
  static std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard lock(mutex);
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << rng();
  return out.str();
}

bool safe_name(const std::string& name) {
  static const std::regex pattern("[A-Za-z0-9_][A-Za-z0-9_.-]*");
  return std::regex_match(name, pattern) && name.find("..") == std::string::npos;
}

std::int64_t parse_id(const std::string& text) {
  try {
    std::size_t used = 0;
    const auto v = std::stoll(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw NotFoundError("bad hypothesis id: " + text);
}

Response error_response(const std::exception& e) {
  std::string kind = "internal";
  if (dynamic_cast<const NotFoundError*>(&e)) kind = "not_found";
  else if (dynamic_cast<const StateError*>(&e) || dynamic_cast<const ExhaustionError*>(&e)) kind = "state";
  else if (status_for(e) == 400) kind = "invalid";
  return {status_for(e), json{{"error", kind}, {"message", e.what()}}};
}

json record_body(const session::Session& s, const session::HypothesisRecord& r) {
  json body = session::record_to_json(r);
  body["wealth"] = s.ledger_state().wealth;
  body["exhausted"] = s.ledger_state().exhausted;
  return body;
}

}  // namespace

int status_for(const std::exception& e) {
  if (dynamic_cast<const NotFoundError*>(&e)) return 404;
  if (dynamic_cast<const StateError*>(&e) || dynamic_cast<const ExhaustionError*>(&e)) return 409;
  if (dynamic_cast<const SchemaError*>(&e) || dynamic_cast<const DomainError*>(&e) ||
      dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DegenerateInputError*>(&e) ||
      dynamic_cast<const MissingInputError*>(&e) || dynamic_cast<const IngestionError*>(&e) ||
      dynamic_cast<const json::exception*>(&e)) {
    return 400;
  }
  return 500;
}

SessionService::SessionService(std::filesystem::path data_dir) : data_dir_(std::move(data_dir)) {
  std::filesystem::create_directories(data_dir_ / "sessions");
}

std::filesystem::path SessionService::log_path(const std::string& id) const {
  return data_dir_ / "sessions" / (id + ".jsonl");
}

std::shared_ptr<const data::Dataset> SessionService::dataset(const std::string& name) const {
  if (!safe_name(name)) throw SchemaError("bad dataset name: " + name);
  const auto path = data_dir_ / (name + ".csv");
  if (!std::filesystem::exists(path)) throw NotFoundError("no dataset named " + name);
  return std::make_shared<const data::Dataset>(data::load_dataset(path));
}

void SessionService::append_events(const session::Session& s, std::size_t from) const {
  std::ofstream out(log_path(s.id()), std::ios::app);
  for (std::size_t i = from; i < s.events().size(); ++i) out << s.events()[i].dump() << '\n';
  if (!out) throw Error("cannot write event log for session " + s.id());
}

session::Session SessionService::load(const std::string& id) const {
  std::ifstream in(log_path(id));
  if (!in) throw NotFoundError("no session " + id);
  std::string line;
  if (!std::getline(in, line)) throw ReplayError("empty event log for session " + id);
  const json header = json::parse(line);
  std::vector<json> events;
  while (std::getline(in, line)) {
    if (!line.empty()) events.push_back(json::parse(line));
  }
  return session::Session::rebuild(dataset(header.at("dataset").get<std::string>()), header, events);
}

std::shared_ptr<SessionService::Entry> SessionService::find(const std::string& id) {
  if (!safe_name(id)) throw NotFoundError("no session " + id);
  std::lock_guard lock(map_mutex_);
  auto it = sessions_.find(id);
  if (it != sessions_.end()) return it->second;
  auto entry = std::make_shared<Entry>();
  entry->session = std::make_unique<session::Session>(load(id));
  sessions_.emplace(id, entry);
  return entry;
}

Response SessionService::create(const json& body) {
  if (!body.is_object() || !body.contains("dataset")) throw SchemaError("missing field: dataset");
  const auto name = body.at("dataset").get<std::string>();
  auto config = ledger::config_from_json(body);
  auto entry = std::make_shared<Entry>();
  entry->session = std::make_unique<session::Session>(random_id(), dataset(name), config);
  const auto& s = *entry->session;
  {
    std::ofstream out(log_path(s.id()));
    out << s.header().dump() << '\n';
    if (!out) throw Error("cannot create event log");
  }
  std::lock_guard lock(map_mutex_);
  sessions_.emplace(s.id(), entry);
  return {201, s.state_json()};
}

Response SessionService::handle(const std::string& method, const std::string& path,
                                const std::map<std::string, std::string>& query,
                                const std::string& body_text) {
  try {
    json body;
    if (!body_text.empty()) {
      try {
        body = json::parse(body_text);
      } catch (const json::parse_error& e) {
        throw SchemaError(std::string("request body is not JSON: ") + e.what());
      }
    }
    static const std::regex route("^/sessions/?([^/]*)(/.*)?$");
    std::smatch m;
    if (!std::regex_match(path, m, route)) throw NotFoundError("no route for " + path);
    const std::string id = m[1];
    const std::string rest = m[2];
    if (id.empty()) {
      if (method != "POST") throw NotFoundError("no route for " + method + " " + path);
      return create(body);
    }
    return dispatch(method, id, rest, query, body);
  } catch (const std::exception& e) {
    return error_response(e);
  }
}

Response SessionService::dispatch(const std::string& method, const std::string& id,
                                  const std::string& rest,
                                  const std::map<std::string, std::string>& query,
                                  const json& body) {
  auto entry = find(id);
  static const std::regex hyp("^/hypotheses/([^/]+)(/star|/flip)?$");
  std::smatch m;

  if (method == "GET") {
    std::shared_lock lock(entry->mutex);
    const auto& s = *entry->session;
    if (rest.empty() || rest == "/") return {200, s.state_json()};
    if (rest == "/events") {
      json out{{"header", s.header()}, {"events", s.events()}};
      return {200, out};
    }
    if (std::regex_match(rest, m, hyp)) {
      const auto hid = parse_id(m[1]);
      if (m[2] == "/flip") {
        auto it = query.find("direction");
        if (it == query.end()) throw SchemaError("missing query parameter: direction");
        const auto dir = session::flip_direction_from_string(it->second);
        const auto f = s.data_to_flip(hid, dir);
        return {200, json{{"id", hid},
                          {"direction", it->second},
                          {"factor", f.factor},
                          {"reachable", f.reachable},
                          {"budget", f.budget}}};
      }
      if (m[2].length() == 0) return {200, record_body(s, s.record(hid))};
    }
    throw NotFoundError("no route for GET " + rest);
  }

  std::unique_lock lock(entry->mutex);
  auto& s = *entry->session;
  const std::size_t before = s.events().size();
  Response out;
  if (method == "POST" && rest == "/visualizations") {
    const auto viz = body.get<session::VisualizationSpec>();
    const auto o = s.derive_hypothesis(viz);
    json j = record_body(s, s.record(o.record_id));
    j["viz_id"] = o.viz_id;
    j["record_id"] = o.record_id;
    j["descriptive"] = o.descriptive;
    j["superseded"] = o.superseded;
    out = {201, j};
  } else if (method == "POST" && rest == "/hypotheses") {
    const auto& r = s.add_hypothesis(session::test_spec_from_json(body));
    out = {201, record_body(s, r)};
  } else if (std::regex_match(rest, m, hyp)) {
    const auto hid = parse_id(m[1]);
    if (method == "PUT" && m[2].length() == 0) {
      const auto& r = s.override_hypothesis(hid, session::test_spec_from_json(body));
      out = {200, record_body(s, r)};
    } else if (method == "DELETE" && m[2].length() == 0) {
      s.delete_hypothesis(hid);
      out = {200, record_body(s, s.record(hid))};
    } else if (method == "POST" && m[2] == "/star") {
      const bool on = body.is_object() ? body.value("on", true) : true;
      const auto o = s.star_hypothesis(hid, on);
      json j{{"id", o.record_id}, {"starred", o.starred}};
      j["warning"] = o.warning.empty() ? json(nullptr) : json(o.warning);
      out = {200, j};
    } else {
      throw NotFoundError("no route for " + method + " " + rest);
    }
  } else {
    throw NotFoundError("no route for " + method + " " + rest);
  }
  append_events(s, before);
  return out;
}

// --- HTTP transport -----------------------------------------------------------

HttpServer::HttpServer(SessionService& service)
    : service_(service), server_(std::make_unique<httplib::Server>()) {
  auto forward = [this](const httplib::Request& req, httplib::Response& res) {
    std::map<std::string, std::string> query;
    for (const auto& [k, v] : req.params) query[k] = v;
    const auto r = service_.handle(req.method, req.path, query, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server_->Get(".*", forward);
  server_->Post(".*", forward);
  server_->Put(".*", forward);
  server_->Delete(".*", forward);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return server_->bind_to_any_port(host);
  if (!server_->bind_to_port(host, port)) throw Error("cannot bind to port " + std::to_string(port));
  return port;
}

void HttpServer::listen() { server_->listen_after_bind(); }

void HttpServer::stop() {
  if (server_) server_->stop();
}

}  // namespace aware::service
