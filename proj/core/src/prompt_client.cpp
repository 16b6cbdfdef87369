#include "neurocat/prompt_client.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <semaphore>
#include <set>
#include <thread>
#include <unordered_set>

#include "httplib.h"
#include "json.hpp"
#include "neurocat/errors.hpp"
#include "neurocat/random.hpp"

namespace neurocat {

using json = nlohmann::json;

namespace {

constexpr std::string_view kTemplateV1 =
    "You will receive a JSON object with a list of tokens taken from a language model vocabulary "
    "and a number k. Partition the tokens into exactly k groups so that tokens in the same group "
    "share a common semantic or categorical feature. Assign every token to exactly one group. "
    "Copy each token exactly as given, including any leading space. Reply with a single JSON "
    "object and nothing else, in the form {\"assignments\": {\"<token>\": <group number from 1 to k>, ...}}.";

std::string strip_fence(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  s.remove_prefix(b);
  if (s.starts_with("```")) {
    auto nl = s.find('\n');
    s.remove_prefix(nl == std::string_view::npos ? s.size() : nl + 1);
    auto close = s.rfind("```");
    if (close != std::string_view::npos) s = s.substr(0, close);
  }
  return std::string(s);
}

}  // namespace

std::size_t ClusterResponse::group_count() const {
  std::set<int> ids;
  for (const auto& [_, g] : assignments) ids.insert(g);
  return ids.size();
}

std::string_view prompt_template(std::string_view template_id) {
  if (template_id == "catseg-v1") return kTemplateV1;
  throw InvalidArgument("unknown prompt template '" + std::string(template_id) + "'");
}

std::string render_user_message(const ClusterRequest& request) {
  json j;
  j["k"] = request.k;
  j["tokens"] = request.tokens;
  return j.dump();
}

ClusterResponse parse_model_output(const ClusterRequest& request, std::string_view content) {
  json j;
  try {
    j = json::parse(strip_fence(content));
  } catch (const json::parse_error& e) {
    throw BackendFormatError(std::string("model output is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("assignments") || !j["assignments"].is_object())
    throw BackendFormatError("model output lacks an 'assignments' object");

  std::unordered_set<std::string_view> requested(request.tokens.begin(), request.tokens.end());
  ClusterResponse resp;
  for (const auto& [token, group] : j["assignments"].items()) {
    if (!requested.contains(token)) throw ValidationError("model returned token not in request: '" + token + "'");
    if (!group.is_number_integer()) throw BackendFormatError("group for '" + token + "' is not an integer");
    const int g = group.get<int>();
    if (g < 1 || g > request.k)
      throw ValidationError("group " + std::to_string(g) + " for '" + token + "' outside [1, " +
                            std::to_string(request.k) + "]");
    resp.assignments.emplace(token, g);
  }
  for (const auto& t : request.tokens) {
    if (!resp.assignments.contains(t)) resp.unassigned.push_back(t);
  }
  return resp;
}

// ---------------------------------------------------------------------------

struct RemoteClusterClient::Impl {
  EndpointConfig config;
  std::counting_semaphore<1024> slots;

  explicit Impl(EndpointConfig c)
      : config(std::move(c)), slots(static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(config.max_concurrency, 1, 1024))) {}

  void log(std::string_view what) const {
    if (config.log) config.log(what);
  }

  std::string request_body(const ClusterRequest& req, bool redact) const {
    json body;
    body["model"] = config.model;
    body["temperature"] = 0;
    body["response_format"] = {{"type", "json_object"}};
    body["messages"] = json::array({
        {{"role", "system"}, {"content", std::string(prompt_template(req.template_id))}},
        {{"role", "user"},
         {"content", redact ? "[" + std::to_string(req.tokens.size()) + " tokens redacted]" : render_user_message(req)}},
    });
    return body.dump();
  }
};

RemoteClusterClient::RemoteClusterClient(EndpointConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {
  if (impl_->config.base_url.empty()) throw InvalidArgument("prompt endpoint base URL is empty");
  if (impl_->config.max_attempts < 1) throw InvalidArgument("max_attempts must be >= 1");
}

RemoteClusterClient::~RemoteClusterClient() = default;

std::string RemoteClusterClient::id() const { return "remote:" + impl_->config.model; }

ClusterResponse RemoteClusterClient::cluster(const ClusterRequest& request) {
  if (request.tokens.empty()) throw InvalidArgument("cluster request has no tokens");
  if (request.k < 2) throw InvalidArgument("cluster request needs k >= 2");
  const auto& cfg = impl_->config;
  const std::string body = impl_->request_body(request, false);

  httplib::Headers headers;
  if (const char* key = std::getenv(cfg.api_key_env.c_str()); key && *key)
    headers.emplace("Authorization", std::string("Bearer ") + key);

  impl_->slots.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{impl_->slots};

  auto backoff = cfg.initial_backoff;
  std::string last_error;
  for (int attempt = 1; attempt <= cfg.max_attempts; ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    httplib::Client client(cfg.base_url);
    client.set_connection_timeout(cfg.timeout);
    client.set_read_timeout(cfg.timeout);
    client.set_write_timeout(cfg.timeout);
    impl_->log("request " + impl_->request_body(request, cfg.redact_tokens));
    auto res = client.Post(cfg.path, headers, body, "application/json");
    if (!res) {
      last_error = "transport failure: " + httplib::to_string(res.error());
      continue;
    }
    impl_->log("response " + std::to_string(res->status) + " " + res->body);
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) throw TransportError("prompt backend returned HTTP " + std::to_string(res->status));

    std::string content;
    try {
      auto j = json::parse(res->body);
      content = j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const std::exception& e) {
      last_error = std::string("unexpected completion envelope: ") + e.what();
      if (attempt == cfg.max_attempts) throw BackendFormatError(last_error);
      continue;
    }
    try {
      auto resp = parse_model_output(request, content);
      resp.metadata = "backend=" + id() + " template=" + request.template_id + " attempts=" + std::to_string(attempt);
      return resp;
    } catch (const BackendFormatError& e) {
      last_error = e.what();
      if (attempt == cfg.max_attempts) throw;
    }
  }
  throw TransportError("prompt backend failed after " + std::to_string(cfg.max_attempts) + " attempts: " + last_error);
}

// ---------------------------------------------------------------------------

namespace {

double euclidean(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

ClusterResponse StubClusterClient::cluster(const ClusterRequest& request) {
  if (request.tokens.empty()) throw InvalidArgument("cluster request has no tokens");
  if (request.k < 2) throw InvalidArgument("cluster request needs k >= 2");

  ClusterResponse resp;
  std::vector<const std::string*> tokens;
  std::vector<const std::vector<double>*> vecs;
  for (const auto& t : request.tokens) {
    if (const auto* v = embeddings_->find(t)) {
      tokens.push_back(&t);
      vecs.push_back(v);
    } else {
      resp.unassigned.push_back(t);
    }
  }
  const std::size_t n = tokens.size();
  if (n == 0) {
    resp.metadata = "backend=" + id() + " no tokens with embeddings";
    return resp;
  }

  std::vector<double> dist(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) dist[i * n + j] = dist[j * n + i] = euclidean(*vecs[i], *vecs[j]);

  const auto k = static_cast<std::size_t>(request.k);
  auto total_cost = [&](const std::vector<std::size_t>& medoids) {
    double cost = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (auto m : medoids) best = std::min(best, dist[i * n + m]);
      cost += best;
    }
    return cost;
  };

  // Alternating k-medoids: assign to the nearest medoid, move each medoid to
  // the member with the least total distance, until stable.
  auto refine = [&](std::vector<std::size_t> medoids) {
    std::vector<std::size_t> label(n, 0);
    for (int iter = 0; iter < 100; ++iter) {
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        for (std::size_t m = 1; m < medoids.size(); ++m)
          if (dist[i * n + medoids[m]] < dist[i * n + medoids[best]]) best = m;
        label[i] = best;
      }
      bool changed = false;
      for (std::size_t m = 0; m < medoids.size(); ++m) {
        std::size_t best = medoids[m];
        double best_cost = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < n; ++c) {
          if (label[c] != m) continue;
          double cost = 0.0;
          for (std::size_t i = 0; i < n; ++i)
            if (label[i] == m) cost += dist[c * n + i];
          if (cost < best_cost) {
            best_cost = cost;
            best = c;
          }
        }
        changed |= best != medoids[m];
        medoids[m] = best;
      }
      if (!changed) break;
    }
    return std::pair{medoids, label};
  };

  // Greedy BUILD start: each new medoid is the point that lowers the total
  // cost most. It stops early when no point helps, i.e. fewer than k
  // distinct embeddings.
  std::vector<std::size_t> build;
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  while (build.size() < k) {
    std::size_t pick = n;
    double pick_gain = build.empty() ? -std::numeric_limits<double>::infinity() : 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      double gain = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = dist[i * n + c];
        gain += build.empty() ? -d : std::max(0.0, nearest[i] - d);
      }
      if (gain > pick_gain) {
        pick_gain = gain;
        pick = c;
      }
    }
    if (pick == n) break;
    build.push_back(pick);
    for (std::size_t i = 0; i < n; ++i) nearest[i] = std::min(nearest[i], dist[i * n + pick]);
  }

  auto [medoids, label] = refine(build);
  double best_cost = total_cost(medoids);

  // A few seeded D^2-sampled restarts; the cheapest solution wins.
  Rng rng(seed_);
  for (int restart = 0; restart < 4 && build.size() == k; ++restart) {
    std::vector<std::size_t> start{rng.index(n)};
    std::vector<double> d2(n);
    while (start.size() < k) {
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double m = std::numeric_limits<double>::infinity();
        for (auto s : start) m = std::min(m, dist[i * n + s]);
        d2[i] = m * m;
        sum += d2[i];
      }
      double u = rng.uniform() * sum;
      std::size_t next = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        if (u < d2[i]) {
          next = i;
          break;
        }
        u -= d2[i];
      }
      start.push_back(next);
    }
    auto candidate = refine(start);
    const double cost = total_cost(candidate.first);
    if (cost < best_cost - 1e-12) {
      best_cost = cost;
      medoids = candidate.first;
      label = candidate.second;
    }
  }

  for (std::size_t i = 0; i < n; ++i) resp.assignments.emplace(*tokens[i], static_cast<int>(label[i]) + 1);
  resp.metadata = "backend=" + id() + " seed=" + std::to_string(seed_) + " groups=" +
                  std::to_string(medoids.size()) + "/" + std::to_string(request.k);
  if (medoids.size() < static_cast<std::size_t>(request.k)) resp.metadata += " degenerate";
  return resp;
}

Partition partition_from_response(const NeuronRecord& neuron, const ClusterResponse& response) {
  std::map<int, std::vector<TokenActivation>> by_group;
  for (const auto& t : neuron.core_tokens) {
    if (auto it = response.assignments.find(t.token); it != response.assignments.end())
      by_group[it->second].push_back(t);
  }
  std::vector<std::vector<TokenActivation>> groups;
  for (auto& [_, g] : by_group) groups.push_back(std::move(g));
  return make_partition(PartitionKind::categorical, std::move(groups));
}

}  // namespace neurocat
