#include "ebench/study_server.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <httplib.h>

#include "ebench/error.hpp"

namespace ebench::study {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void send_json(httplib::Response& res, int status, json body) {
  body["schema"] = kSchema;
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", {{"status", status}, {"message", message}}}});
}

// Runs a handler, mapping toolkit errors onto HTTP status codes.
template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const ValidationError& e) {
    send_error(res, 400, e.what());
  } catch (const json::exception& e) {
    send_error(res, 400, std::string("malformed JSON: ") + e.what());
  } catch (const NotFoundError& e) {
    send_error(res, 404, e.what());
  } catch (const ConflictError& e) {
    send_error(res, 409, e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, e.what());
  }
}

json body_object(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  json doc = json::parse(req.body);
  if (!doc.is_object()) throw ValidationError("request body must be a JSON object");
  return doc;
}

std::string required_string(const json& doc, const char* key) {
  if (!doc.contains(key) || !doc.at(key).is_string()) {
    throw ValidationError(std::string("field '") + key + "' must be a string");
  }
  return doc.at(key).get<std::string>();
}

json item_json(const ItemPayload& i) {
  return {{"triplet_id", i.triplet_id},
          {"source_url", i.source_url},
          {"edited_url", i.edited_url},
          {"prompt", i.prompt}};
}

json session_json(const Session& s) {
  return {{"session_id", s.session_id},
          {"study_id", s.study_id},
          {"annotator_id", s.annotator_id},
          {"items", s.items},
          {"cursor", s.cursor},
          {"total", s.items.size()},
          {"status", to_string(s.status)}};
}

std::string content_type(const fs::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".png") return "image/png";
  if (ext == ".ppm") return "image/x-portable-pixmap";
  if (ext == ".mp4") return "video/mp4";
  if (ext == ".json") return "application/json";
  return "application/octet-stream";
}

}  // namespace

StudyServer::StudyServer(StudyStore& store)
    : store_(store), server_(std::make_unique<httplib::Server>()) {
  routes();
}

StudyServer::~StudyServer() { stop(); }

void StudyServer::routes() {
  auto& srv = *server_;

  srv.Post("/studies", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = body_object(req);
      StudyConfig cfg;
      cfg.manifest = required_string(body, "manifest");
      if (body.contains("study_id")) cfg.study_id = required_string(body, "study_id");
      cfg.seed = body.value("seed", cfg.seed);
      cfg.min_participants = body.value("min_participants", cfg.min_participants);
      cfg.instructions = body.value("instructions", cfg.instructions);
      const Manifest manifest = load_manifest(cfg.manifest);
      const auto id = store_.create_study(cfg, manifest);
      const Study st = store_.study(id);
      send_json(res, 201,
                {{"study_id", id},
                 {"items", st.items.size()},
                 {"min_participants", st.config.min_participants},
                 {"instructions", st.config.instructions},
                 {"scale", {{"min", kMinScore}, {"max", kMaxScore}}}});
    });
  });

  srv.Get(R"(/studies/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const Study st = store_.study(req.matches[1]);
      json items = json::array();
      for (const auto& i : st.items) items.push_back(item_json(i));
      send_json(res, 200,
                {{"study_id", st.config.study_id},
                 {"seed", st.config.seed},
                 {"min_participants", st.config.min_participants},
                 {"instructions", st.config.instructions},
                 {"scale", {{"min", kMinScore}, {"max", kMaxScore}}},
                 {"items", items}});
    });
  });

  srv.Post(R"(/studies/([^/]+)/enroll)",
           [this](const httplib::Request& req, httplib::Response& res) {
             guarded(res, [&] {
               const json body = body_object(req);
               const Session s = store_.enroll(req.matches[1], required_string(body, "annotator_id"));
               send_json(res, 200, session_json(s));
             });
           });

  srv.Get(R"(/sessions/([^/]+)/next)", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const NextItem n = store_.next_item(req.matches[1]);
      json body = {{"session_id", std::string(req.matches[1])},
                   {"done", n.done},
                   {"index", n.index},
                   {"total", n.total}};
      if (n.item) body["item"] = item_json(*n.item);
      send_json(res, 200, body);
    });
  });

  srv.Post(R"(/sessions/([^/]+)/ratings)",
           [this](const httplib::Request& req, httplib::Response& res) {
             guarded(res, [&] {
               const json body = body_object(req);
               const auto triplet = required_string(body, "triplet_id");
               if (!body.contains("score") || !body.at("score").is_number_integer()) {
                 throw ValidationError("field 'score' must be an integer from 1 to 10");
               }
               const auto raw = body.at("score").get<long long>();
               if (raw < kMinScore || raw > kMaxScore) {
                 throw ValidationError("score " + std::to_string(raw) + " is outside 1..10");
               }
               const RatingAck ack =
                   store_.submit_rating(req.matches[1], triplet, static_cast<int>(raw));
               send_json(res, 200,
                         {{"accepted", true},
                          {"duplicate", ack.duplicate},
                          {"cursor", ack.cursor},
                          {"status", to_string(ack.status)}});
             });
           });

  srv.Get(R"(/studies/([^/]+)/progress)",
          [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
              const Progress p = store_.progress(req.matches[1]);
              json annotators = json::array();
              for (const auto& a : p.annotators) {
                annotators.push_back({{"annotator_id", a.annotator_id},
                                      {"session_id", a.session_id},
                                      {"rated", a.rated},
                                      {"total", a.total},
                                      {"complete", a.complete}});
              }
              send_json(res, 200,
                        {{"study_id", p.study_id},
                         {"enrolled", p.enrolled},
                         {"complete", p.complete},
                         {"min_participants", p.min_participants},
                         {"participant_warning", p.participant_warning},
                         {"annotators", annotators}});
            });
          });

  srv.Get(R"(/studies/([^/]+)/export\.csv)",
          [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
              res.set_content(store_.export_csv(req.matches[1]), "text/csv");
              res.set_header("X-Ebench-Schema", kSchema);
              res.status = 200;
            });
          });

  srv.Get(R"(/media/([^/]+)/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string study_id = req.matches[1];
      const Study st = store_.study(study_id);
      const fs::path root = fs::weakly_canonical(st.media_root);
      const fs::path target = fs::weakly_canonical(root / std::string(req.matches[2]));
      const auto rel = target.lexically_relative(root);
      if (rel.empty() || *rel.begin() == "..") throw NotFoundError("media path outside the study");
      if (fs::is_directory(target)) {
        std::vector<std::string> frames;
        for (const auto& e : fs::directory_iterator(target)) {
          const auto ext = e.path().extension().string();
          if (ext == ".png" || ext == ".ppm") frames.push_back(e.path().filename().string());
        }
        std::sort(frames.begin(), frames.end());
        json urls = json::array();
        for (const auto& f : frames) {
          urls.push_back("/media/" + study_id + "/" + (rel / f).generic_string());
        }
        send_json(res, 200, {{"frames", urls}});
        return;
      }
      if (!fs::is_regular_file(target)) throw NotFoundError("no media at " + rel.generic_string());
      std::ifstream in(target, std::ios::binary);
      std::ostringstream buf;
      buf << in.rdbuf();
      res.set_content(buf.str(), content_type(target));
      res.status = 200;
    });
  });

  srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) send_error(res, res.status, "no such endpoint");
  });
}

int StudyServer::start(const std::string& host, int port) {
  if (port == 0) {
    port_ = server_->bind_to_any_port(host);
  } else {
    if (!server_->bind_to_port(host, port)) {
      throw Error("study server: cannot bind " + host + ":" + std::to_string(port));
    }
    port_ = port;
  }
  if (port_ <= 0) throw Error("study server: cannot bind " + host);
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void StudyServer::run(const std::string& host, int port) {
  if (!server_->bind_to_port(host, port)) {
    throw Error("study server: cannot bind " + host + ":" + std::to_string(port));
  }
  port_ = port;
  server_->listen_after_bind();
}

void StudyServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace ebench::study
