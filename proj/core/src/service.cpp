#include "neurocat/service.hpp"

#include <charconv>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "httplib.h"
#include "json.hpp"
#include "neurocat/corpus_runner.hpp"
#include "neurocat/errors.hpp"
#include "neurocat/manifest.hpp"
#include "neurocat/report.hpp"

namespace neurocat {

using json = nlohmann::ordered_json;

namespace {

struct ApiError {
  int status;
  std::string code;
  std::string message;
};

HttpResponse error_response(const ApiError& e) {
  HttpResponse r;
  r.status = e.status;
  r.body = json{{"error", {{"status", e.status}, {"code", e.code}, {"message", e.message}}}}.dump();
  return r;
}

std::vector<std::string_view> split_path(std::string_view path) {
  std::vector<std::string_view> parts;
  std::size_t pos = 0;
  while (pos <= path.size()) {
    auto end = path.find('/', pos);
    if (end == std::string_view::npos) end = path.size();
    if (end > pos) parts.push_back(path.substr(pos, end - pos));
    pos = end + 1;
  }
  return parts;
}

int parse_int(std::string_view s, std::string_view what) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) throw ApiError{400, "invalid_parameter", std::string(what) + " must be an integer"};
  return v;
}

int k_param(const std::map<std::string, std::string>& q, int fallback) {
  auto it = q.find("k");
  if (it == q.end()) return fallback;
  const int k = parse_int(it->second, "k");
  if (k < 2 || k > 20) throw ApiError{400, "invalid_parameter", "k must be in [2, 20]"};
  return k;
}

ClusteringBackend backend_param(const std::map<std::string, std::string>& q, ClusteringBackend fallback) {
  auto it = q.find("backend");
  if (it == q.end()) return fallback;
  if (it->second == "embedding" || it->second == "embedding_hclust") return ClusteringBackend::embedding_hclust;
  if (it->second == "prompt") return ClusteringBackend::prompt;
  throw ApiError{400, "invalid_parameter", "backend must be embedding or prompt"};
}

ActivationSegmentation segmentation_param(const std::map<std::string, std::string>& q, ActivationSegmentation fallback) {
  auto it = q.find("segmentation");
  if (it == q.end()) return fallback;
  if (it->second == "quartile") return ActivationSegmentation::quartile;
  if (it->second == "hclust") return ActivationSegmentation::hclust;
  throw ApiError{400, "invalid_parameter", "segmentation must be quartile or hclust"};
}

json with_digest(std::string_view body, const std::string& digest) {
  json j = json::parse(body);
  j["run_digest"] = digest;
  return j;
}

}  // namespace

struct AnalysisService::Impl {
  std::vector<NeuronRecord> neurons;
  std::map<NeuronId, std::size_t> index;
  EmbeddingTable embeddings;
  RunConfig config;
  ServiceOptions options;
  std::unique_ptr<ClusterBackend> remote;
  std::unique_ptr<StubClusterClient> stub;
  std::string digest;
  const AnalysisService* owner = nullptr;

  mutable std::mutex cache_mutex;
  mutable std::unordered_map<std::string, HttpResponse> cache;

  httplib::Server server;
  std::thread thread;
  int bound_port = -1;

  ClusterBackend& prompt_backend() const {
    if (options.allow_prompt_backend && remote) return *remote;
    return *stub;
  }

  const NeuronRecord& neuron(std::string_view layer, std::string_view idx) const {
    const NeuronId id{parse_int(layer, "layer"), parse_int(idx, "index")};
    auto it = index.find(id);
    if (it == index.end()) throw ApiError{404, "neuron_not_found", "no neuron " + to_string(id)};
    return neurons[it->second];
  }

  std::unique_ptr<PartitionSource> source(ClusteringBackend b) const {
    if (b == ClusteringBackend::prompt)
      return std::make_unique<PromptPartitionSource>(prompt_backend(), config.prompt_template);
    return std::make_unique<EmbeddingPartitionSource>(embeddings);
  }

  json route(const std::vector<std::string_view>& parts, const std::map<std::string, std::string>& q) const;
  void register_routes();
};

json AnalysisService::Impl::route(const std::vector<std::string_view>& parts,
                                  const std::map<std::string, std::string>& q) const {
  const auto not_found = ApiError{404, "not_found", "no such endpoint"};
  if (parts.empty()) throw not_found;

  if (parts[0] == "layers" && parts.size() == 1) {
    std::map<int, std::size_t> counts;
    for (const auto& n : neurons) ++counts[n.id.layer];
    json layers = json::array();
    for (const auto& [layer, count] : counts) layers.push_back({{"layer", layer}, {"neurons", count}});
    return json{{"layers", std::move(layers)}, {"run_digest", digest}};
  }

  if (parts[0] == "neurons" && (parts.size() == 3 || parts.size() == 4)) {
    const auto& n = neuron(parts[1], parts[2]);
    if (parts.size() == 3) return with_digest(to_json(n), digest);
    RunConfig cfg = config;
    if (parts[3] == "topdown" || parts[3] == "interleaving") {
      const auto backend = backend_param(q, config.clustering_backend);
      cfg.k_categorical = k_param(q, config.k_categorical);
      const auto src = source(backend);
      if (parts[3] == "topdown") return with_digest(to_json(analyze_neuron_topdown(n, *src, cfg)), digest);
      const auto r = analyze_neuron_interleaving(n, *src, cfg);
      return json{{"neuron", {{"layer", r.id.layer}, {"index", r.id.index}}},
                  {"backend", r.backend},
                  {"cells", json::parse(to_json(std::span<const InterleaveCell>(r.cells)))},
                  {"run_digest", digest}};
    }
    if (parts[3] == "bottomup") {
      const auto seg = segmentation_param(q, config.activation_segmentation);
      cfg.k_activation = k_param(q, config.k_activation);
      return with_digest(to_json(analyze_neuron_bottomup(n, embeddings, seg, cfg)), digest);
    }
    throw not_found;
  }

  if (parts[0] == "aggregate" && parts.size() == 2) {
    std::vector<int> layers;
    if (auto it = q.find("layer"); it != q.end()) layers.push_back(parse_int(it->second, "layer"));
    const auto subset = filter_layers(neurons, layers);
    if (subset.empty()) throw ApiError{404, "layer_not_found", "no neurons in the requested layer"};
    RunConfig cfg = config;
    json body;
    if (parts[1] == "topdown" || parts[1] == "interleaving") {
      const auto backend = backend_param(q, config.clustering_backend);
      cfg.k_categorical = k_param(q, config.k_categorical);
      const auto src = source(backend);
      if (parts[1] == "topdown") {
        const auto out = run_topdown(subset, *src, cfg);
        body = json::parse(to_json(aggregate_topdown(out.results, cfg.alpha)));
        body["failures"] = out.failures.size();
      } else {
        const auto out = run_interleaving(subset, *src, cfg);
        body = json::parse(to_json(aggregate_interleaving(out.results)));
        body["failures"] = out.failures.size();
      }
      body["backend"] = src->id();
    } else if (parts[1] == "bottomup") {
      const auto seg = segmentation_param(q, config.activation_segmentation);
      cfg.k_activation = k_param(q, config.k_activation);
      const auto out = run_bottomup(subset, embeddings, seg, cfg);
      body = json::parse(to_json(aggregate_bottomup(out.results)));
      body["failures"] = out.failures.size();
      body["segmentation"] = to_string(seg);
    } else {
      throw not_found;
    }
    body["run_digest"] = digest;
    return body;
  }
  throw not_found;
}

void AnalysisService::Impl::register_routes() {
  auto to_query = [](const httplib::Request& req) {
    std::map<std::string, std::string> q;
    for (const auto& [k, v] : req.params) q.emplace(k, v);
    return q;
  };
  auto cors = [this](httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", options.cors_origin);
    res.set_header("Access-Control-Allow-Methods", "GET, HEAD, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "If-None-Match");
    res.set_header("Access-Control-Expose-Headers", "ETag");
  };
  server.Get(R"(/api(/.*)?)", [this, to_query, cors](const httplib::Request& req, httplib::Response& res) {
    const HttpResponse r = owner->handle("GET", req.path, to_query(req));
    cors(res);
    if (!r.etag.empty()) {
      res.set_header("ETag", r.etag);
      res.set_header("Cache-Control", "no-cache");
      if (req.get_header_value("If-None-Match") == r.etag) {
        res.status = 304;
        return;
      }
    }
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  });
  server.Options(R"(/api(/.*)?)", [cors](const httplib::Request&, httplib::Response& res) {
    cors(res);
    res.status = 204;
  });
}

AnalysisService::AnalysisService(std::vector<NeuronRecord> neurons, EmbeddingTable embeddings, RunConfig config,
                                 ServiceOptions options, std::unique_ptr<ClusterBackend> remote)
    : impl_(std::make_unique<Impl>()) {
  auto& s = *impl_;
  s.neurons = std::move(neurons);
  for (std::size_t i = 0; i < s.neurons.size(); ++i) s.index.emplace(s.neurons[i].id, i);
  s.embeddings = std::move(embeddings);
  s.config = std::move(config);
  s.options = std::move(options);
  s.remote = std::move(remote);
  s.stub = std::make_unique<StubClusterClient>(s.embeddings, s.config.seed);
  RunManifest m;
  m.tool_version = tool_version();
  m.config_text = s.config.to_text();
  m.inputs["neurons"] = sha256_hex(serialize_neurons(s.neurons));
  m.inputs["embeddings"] = sha256_hex(serialize_embeddings(s.embeddings));
  s.digest = m.run_digest();
  s.owner = this;
  s.register_routes();
}

AnalysisService::~AnalysisService() { stop(); }

HttpResponse AnalysisService::handle(std::string_view method, std::string_view path,
                                     const std::map<std::string, std::string>& query) const {
  const auto& s = *impl_;
  if (method != "GET" && method != "HEAD")
    return error_response({405, "method_not_allowed", "read-only API"});

  std::string_view rest = path;
  if (rest.starts_with("/api/v1/") || rest == "/api/v1")
    rest.remove_prefix(7);
  else if (rest.starts_with("/api/") || rest == "/api")
    rest.remove_prefix(4);
  else
    return error_response({404, "not_found", "no such endpoint"});

  std::string key(rest);
  for (const auto& [k, v] : query) key += "\x1f" + k + "=" + v;
  {
    std::lock_guard lock(s.cache_mutex);
    if (auto it = s.cache.find(key); it != s.cache.end()) return it->second;
  }

  HttpResponse r;
  try {
    r.body = s.route(split_path(rest), query).dump();
  } catch (const ApiError& e) {
    return error_response(e);
  } catch (const TransportError& e) {
    return error_response({502, "backend_failure", e.what()});
  } catch (const BackendFormatError& e) {
    return error_response({502, "backend_failure", e.what()});
  } catch (const ValidationError& e) {
    return error_response({502, "backend_failure", e.what()});
  } catch (const Error& e) {
    return error_response({422, "analysis_failed", e.what()});
  }
  r.etag = "\"" + sha256_hex(s.digest + "\n" + r.body).substr(0, 32) + "\"";
  std::lock_guard lock(s.cache_mutex);
  return s.cache.emplace(key, std::move(r)).first->second;
}

bool AnalysisService::listen() {
  auto& s = *impl_;
  if (s.options.port == 0) {
    s.bound_port = s.server.bind_to_any_port(s.options.bind);
    if (s.bound_port < 0) return false;
  } else {
    if (!s.server.bind_to_port(s.options.bind, s.options.port)) return false;
    s.bound_port = s.options.port;
  }
  return s.server.listen_after_bind();
}

bool AnalysisService::start() {
  auto& s = *impl_;
  if (s.options.port == 0) {
    s.bound_port = s.server.bind_to_any_port(s.options.bind);
    if (s.bound_port < 0) return false;
  } else {
    if (!s.server.bind_to_port(s.options.bind, s.options.port)) return false;
    s.bound_port = s.options.port;
  }
  s.thread = std::thread([&s] { s.server.listen_after_bind(); });
  s.server.wait_until_ready();
  return true;
}

void AnalysisService::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

int AnalysisService::port() const { return impl_->bound_port; }

std::string AnalysisService::digest() const { return impl_->digest; }

}  // namespace neurocat
