#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "neurocat/config.hpp"
#include "neurocat/data_model.hpp"
#include "neurocat/prompt_client.hpp"

namespace neurocat {

struct ServiceOptions {
  std::string bind = "127.0.0.1";
  int port = 8080;
  bool allow_prompt_backend = false;  // remote calls stay off unless set
  std::string cors_origin = "*";
};

struct HttpResponse {
  int status = 200;
  std::string body;
  std::string etag;  // strong validator, quoted
  std::string content_type = "application/json";
};

// Read-only JSON API over an immutable corpus. Analyses run on demand and
// are memoized per (path, query). Routes, under /api and /api/v1:
//   GET /layers
//   GET /neurons/{layer}/{index}
//   GET /neurons/{layer}/{index}/topdown?backend=embedding|prompt&k=5
//   GET /neurons/{layer}/{index}/interleaving?backend=embedding|prompt&k=5
//   GET /neurons/{layer}/{index}/bottomup?segmentation=quartile|hclust&k=4
//   GET /aggregate/{topdown|interleaving|bottomup}?layer=..&backend=..&segmentation=..
class AnalysisService {
 public:
  // `remote` is used for backend=prompt only when options.allow_prompt_backend;
  // otherwise the offline stub answers.
  AnalysisService(std::vector<NeuronRecord> neurons, EmbeddingTable embeddings, RunConfig config,
                  ServiceOptions options, std::unique_ptr<ClusterBackend> remote = nullptr);
  ~AnalysisService();

  AnalysisService(const AnalysisService&) = delete;
  AnalysisService& operator=(const AnalysisService&) = delete;

  // Transport-free entry point; safe to call concurrently.
  HttpResponse handle(std::string_view method, std::string_view path,
                      const std::map<std::string, std::string>& query) const;

  // Binds and serves until stop(). Returns false if the bind fails.
  bool listen();
  // Binds to options.port (0 = ephemeral) and serves on a background thread.
  bool start();
  void stop();
  int port() const;

  std::string digest() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace neurocat
