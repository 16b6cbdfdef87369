#include "neurocat/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "neurocat/errors.hpp"

namespace neurocat {

std::string_view to_string(ClusteringBackend b) {
  return b == ClusteringBackend::embedding_hclust ? "embedding" : "prompt";
}

std::string_view to_string(ActivationSegmentation s) {
  return s == ActivationSegmentation::quartile ? "quartile" : "hclust";
}

ClusteringBackend parse_clustering_backend(std::string_view s) {
  if (s == "embedding" || s == "embedding_hclust") return ClusteringBackend::embedding_hclust;
  if (s == "prompt") return ClusteringBackend::prompt;
  throw InvalidArgument("unknown clustering backend '" + std::string(s) + "'");
}

ActivationSegmentation parse_segmentation(std::string_view s) {
  if (s == "quartile") return ActivationSegmentation::quartile;
  if (s == "hclust") return ActivationSegmentation::hclust;
  throw InvalidArgument("unknown segmentation '" + std::string(s) + "'");
}

void RunConfig::validate(bool kruskal_wallis) const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
  if (k_categorical < 2) throw ValidationError("k_categorical must be >= 2");
  if (k_activation < 2) throw ValidationError("k_activation must be >= 2");
  if (min_cluster_size < 1) throw ValidationError("min_cluster_size must be >= 1");
  if (kruskal_wallis && min_cluster_size < 6)
    throw ValidationError("min_cluster_size must be >= 6 for Kruskal-Wallis");
  if (prompt_mode != "stub" && prompt_mode != "remote") throw ValidationError("prompt_mode must be stub or remote");
  if (prompt_concurrency < 1) throw ValidationError("prompt_concurrency must be >= 1");
  if (prompt_timeout_seconds < 1) throw ValidationError("prompt_timeout_seconds must be >= 1");
}

std::string RunConfig::to_text() const {
  std::ostringstream o;
  o.precision(17);
  o << "alpha=" << alpha << '\n'
    << "k_categorical=" << k_categorical << '\n'
    << "k_activation=" << k_activation << '\n'
    << "min_cluster_size=" << min_cluster_size << '\n'
    << "quantile_method=linear_interpolation\n"
    << "seed=" << seed << '\n'
    << "clustering_backend=" << to_string(clustering_backend) << '\n'
    << "activation_segmentation=" << to_string(activation_segmentation) << '\n'
    << "prompt_mode=" << prompt_mode << '\n'
    << "prompt_endpoint=" << prompt_endpoint << '\n'
    << "prompt_model=" << prompt_model << '\n'
    << "prompt_api_key_env=" << prompt_api_key_env << '\n'
    << "prompt_template=" << prompt_template << '\n'
    << "prompt_concurrency=" << prompt_concurrency << '\n'
    << "prompt_timeout_seconds=" << prompt_timeout_seconds << '\n';
  return o.str();
}

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& v, std::size_t line, const std::string& key) {
  std::istringstream in(v);
  T out{};
  in >> out;
  if (!in || !in.eof()) throw ParseError(line, "bad value for " + key + ": '" + v + "'");
  return out;
}

}  // namespace

RunConfig parse_config(std::istream& in) {
  RunConfig c;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (auto hash = text.find('#'); hash != std::string::npos) text.erase(hash);
    auto stripped = trim(text);
    if (stripped.empty()) continue;
    auto eq = stripped.find('=');
    if (eq == std::string::npos) throw ParseError(line, "expected key=value");
    auto key = trim(std::string_view(stripped).substr(0, eq));
    auto value = trim(std::string_view(stripped).substr(eq + 1));
    try {
      if (key == "alpha") {
        c.alpha = parse_number<double>(value, line, key);
      } else if (key == "k_categorical") {
        c.k_categorical = parse_number<int>(value, line, key);
      } else if (key == "k_activation") {
        c.k_activation = parse_number<int>(value, line, key);
      } else if (key == "min_cluster_size") {
        c.min_cluster_size = parse_number<int>(value, line, key);
      } else if (key == "quantile_method") {
        if (value != "linear_interpolation") throw ParseError(line, "unsupported quantile_method '" + value + "'");
      } else if (key == "seed") {
        c.seed = parse_number<std::uint64_t>(value, line, key);
      } else if (key == "clustering_backend") {
        c.clustering_backend = parse_clustering_backend(value);
      } else if (key == "activation_segmentation") {
        c.activation_segmentation = parse_segmentation(value);
      } else if (key == "prompt_mode") {
        c.prompt_mode = value;
      } else if (key == "prompt_endpoint") {
        c.prompt_endpoint = value;
      } else if (key == "prompt_model") {
        c.prompt_model = value;
      } else if (key == "prompt_api_key_env") {
        c.prompt_api_key_env = value;
      } else if (key == "prompt_template") {
        c.prompt_template = value;
      } else if (key == "prompt_concurrency") {
        c.prompt_concurrency = parse_number<int>(value, line, key);
      } else if (key == "prompt_timeout_seconds") {
        c.prompt_timeout_seconds = parse_number<int>(value, line, key);
      } else {
        throw ParseError(line, "unknown key '" + key + "'");
      }
    } catch (const InvalidArgument& e) {
      throw ParseError(line, e.what());
    }
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return parse_config(in);
}

}  // namespace neurocat
