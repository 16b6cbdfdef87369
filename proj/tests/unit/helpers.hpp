#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "neurocat/data_model.hpp"
#include "neurocat/errors.hpp"
#include "neurocat/partition_source.hpp"
#include "neurocat/segmentation.hpp"

namespace testing {

// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("neurocat_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A neuron whose tokens are "t0".."t{n-1}" with the given activations.
inline neurocat::NeuronRecord make_neuron(std::vector<double> activations, int layer = 0, int index = 0,
                                          const std::string& prefix = "t") {
  neurocat::NeuronRecord r;
  r.id = {layer, index};
  for (std::size_t i = 0; i < activations.size(); ++i)
    r.core_tokens.push_back({prefix + std::to_string(i), activations[i]});
  neurocat::sort_core_tokens(r);
  return r;
}

// Categorical clusters read from a fixed token -> group table.
class MapSource : public neurocat::PartitionSource {
 public:
  explicit MapSource(std::map<std::string, int> groups) : groups_(std::move(groups)) {}
  neurocat::Partition partition(const neurocat::NeuronRecord& neuron, std::size_t) const override {
    std::map<int, std::vector<neurocat::TokenActivation>> raw;
    for (const auto& t : neuron.core_tokens) {
      auto it = groups_.find(t.token);
      if (it != groups_.end()) raw[it->second].push_back(t);
    }
    std::vector<std::vector<neurocat::TokenActivation>> groups;
    for (auto& [_, g] : raw) groups.push_back(std::move(g));
    return neurocat::make_partition(neurocat::PartitionKind::categorical, std::move(groups));
  }
  std::string id() const override { return "fixed"; }

 private:
  std::map<std::string, int> groups_;
};

// Assigns token "t<i>" of make_neuron to group[i].
inline std::map<std::string, int> group_map(const std::vector<int>& group, const std::string& prefix = "t") {
  std::map<std::string, int> m;
  for (std::size_t i = 0; i < group.size(); ++i) m[prefix + std::to_string(i)] = group[i];
  return m;
}

}  // namespace testing
