#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "neurocat/data_model.hpp"
#include "neurocat/segmentation.hpp"

namespace neurocat {

inline constexpr std::string_view kDefaultTemplateId = "catseg-v1";

struct ClusterRequest {
  std::vector<std::string> tokens;
  int k = 5;
  std::string template_id{kDefaultTemplateId};
};

struct ClusterResponse {
  std::map<std::string, int> assignments;  // token -> group id in [1, k]
  std::vector<std::string> unassigned;     // request order
  std::string metadata;

  // Number of distinct group ids used.
  std::size_t group_count() const;
};

// Instruction text for a template id. Throws InvalidArgument for unknown ids.
std::string_view prompt_template(std::string_view template_id);
std::string render_user_message(const ClusterRequest& request);

// Parses a model reply of the form {"assignments": {"<token>": <group>, ...}}
// (optionally wrapped in a ```json fence). BackendFormatError when the text
// is not that shape; ValidationError for tokens not in the request or group
// ids outside [1, k].
ClusterResponse parse_model_output(const ClusterRequest& request, std::string_view content);

class ClusterBackend {
 public:
  virtual ~ClusterBackend() = default;
  virtual ClusterResponse cluster(const ClusterRequest& request) = 0;
  virtual std::string id() const = 0;
};

struct EndpointConfig {
  std::string base_url;  // scheme://host[:port]
  std::string path = "/v1/chat/completions";
  std::string model = "gpt-4o";
  std::string api_key_env = "NEUROCAT_PROMPT_API_KEY";
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::seconds timeout{60};
  std::size_t max_concurrency = 4;
  bool redact_tokens = false;
  std::function<void(std::string_view)> log;  // request/response bodies
};

// Chat-completions client. Thread-safe; at most max_concurrency requests are
// in flight at once.
class RemoteClusterClient : public ClusterBackend {
 public:
  explicit RemoteClusterClient(EndpointConfig config);
  ~RemoteClusterClient() override;

  ClusterResponse cluster(const ClusterRequest& request) override;
  std::string id() const override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Offline stand-in: k-medoids on the embeddings, started from a greedy BUILD
// solution and a few seeded restarts. Deterministic for a given seed.
class StubClusterClient : public ClusterBackend {
 public:
  StubClusterClient(const EmbeddingTable& embeddings, std::uint64_t seed)
      : embeddings_(&embeddings), seed_(seed) {}

  ClusterResponse cluster(const ClusterRequest& request) override;
  std::string id() const override { return "stub-kmedoids"; }

 private:
  const EmbeddingTable* embeddings_;
  std::uint64_t seed_;
};

// Groups the assigned core-tokens of `neuron` by response group id.
Partition partition_from_response(const NeuronRecord& neuron, const ClusterResponse& response);

}  // namespace neurocat
