#pragma once

#include <memory>
#include <string>
#include <thread>

#include "ebench/study.hpp"

namespace httplib {
class Server;
}

namespace ebench::study {

// HTTP+JSON front of a StudyStore.
//   POST /studies                      {manifest, study_id?, seed?, min_participants?, instructions?}
//   GET  /studies/{id}
//   POST /studies/{id}/enroll          {annotator_id}
//   GET  /sessions/{id}/next
//   POST /sessions/{id}/ratings        {triplet_id, score}
//   GET  /studies/{id}/progress
//   GET  /studies/{id}/export.csv
//   GET  /media/{study}/{path...}      file bytes, or a JSON frame listing for a directory
// Status codes: 400 invalid input, 404 unknown entity, 409 state conflict.
class StudyServer {
 public:
  explicit StudyServer(StudyStore& store);
  ~StudyServer();
  StudyServer(const StudyServer&) = delete;
  StudyServer& operator=(const StudyServer&) = delete;

  // Binds (port 0 picks a free port) and serves on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  // Binds and serves on the calling thread until stop().
  void run(const std::string& host, int port);
  void stop();
  int port() const { return port_; }

 private:
  void routes();

  StudyStore& store_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace ebench::study
