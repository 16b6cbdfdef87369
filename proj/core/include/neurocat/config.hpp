#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

namespace neurocat {

enum class QuantileMethod { linear_interpolation };
enum class ClusteringBackend { embedding_hclust, prompt };
enum class ActivationSegmentation { quartile, hclust };

std::string_view to_string(ClusteringBackend b);
std::string_view to_string(ActivationSegmentation s);
ClusteringBackend parse_clustering_backend(std::string_view s);
ActivationSegmentation parse_segmentation(std::string_view s);

struct RunConfig {
  double alpha = 0.05;
  int k_categorical = 5;
  int k_activation = 4;
  int min_cluster_size = 6;
  QuantileMethod quantile_method = QuantileMethod::linear_interpolation;
  std::uint64_t seed = 0x5eed;
  ClusteringBackend clustering_backend = ClusteringBackend::embedding_hclust;
  ActivationSegmentation activation_segmentation = ActivationSegmentation::quartile;

  // Prompt backend settings. The credential itself is only ever read from
  // the environment variable named here.
  std::string prompt_mode = "stub";  // stub | remote
  std::string prompt_endpoint;
  std::string prompt_model = "gpt-4o";
  std::string prompt_api_key_env = "NEUROCAT_PROMPT_API_KEY";
  std::string prompt_template = "catseg-v1";
  int prompt_concurrency = 4;
  int prompt_timeout_seconds = 60;

  // Post-hoc threshold alpha / (k (k - 1)).
  double adjusted_alpha(int k) const { return alpha / (static_cast<double>(k) * (k - 1)); }

  // Throws ValidationError. `kruskal_wallis` adds the six-observation rule.
  void validate(bool kruskal_wallis = true) const;

  // Plain `key=value` lines in a fixed key order; parse_config(to_text(c)) == c.
  std::string to_text() const;

  bool operator==(const RunConfig&) const = default;
};

// Lines are `key = value`; `#` starts a comment; unknown keys are errors.
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace neurocat
