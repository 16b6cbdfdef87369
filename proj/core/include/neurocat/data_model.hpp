#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace neurocat {

inline constexpr std::size_t kMaxCoreTokens = 100;

struct NeuronId {
  int layer = 0;
  int index = 0;

  auto operator<=>(const NeuronId&) const = default;
};

std::string to_string(const NeuronId& id);

struct TokenActivation {
  std::string token;  // surface form; leading whitespace is significant
  double activation = 0.0;

  bool operator==(const TokenActivation&) const = default;
};

// One neuron and its core-tokens, sorted non-increasing by activation.
struct NeuronRecord {
  NeuronId id;
  std::vector<TokenActivation> core_tokens;

  bool operator==(const NeuronRecord&) const = default;
};

// Token -> embedding vector. Every row has length dim() and is non-zero.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

  // Throws DimensionError on length mismatch, ValidationError on a zero or
  // non-finite vector, DuplicateError on a repeated token.
  void add(std::string token, std::vector<double> vector);

  const std::vector<double>* find(std::string_view token) const;
  bool contains(std::string_view token) const { return find(token) != nullptr; }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return order_.size(); }
  bool empty() const noexcept { return order_.empty(); }

  // Tokens in insertion order.
  const std::vector<std::string>& tokens() const noexcept { return order_; }

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept {
      return std::hash<std::string_view>{}(s);
    }
  };
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<double>, Hash, std::equal_to<>> rows_;
  std::vector<std::string> order_;
};

// Neuron records, one JSON object per line:
//   {"layer":0,"neuron":5065,"core_tokens":[{"t":" token","a":3.14}, ...]}
// Records keep file order; core_tokens are re-sorted non-increasing.
std::vector<NeuronRecord> parse_neurons(std::istream& in);
std::vector<NeuronRecord> load_neurons(const std::filesystem::path& path);

// Canonical JSONL for records; load(serialize(x)) == x.
std::string serialize_neuron(const NeuronRecord& record);
std::string serialize_neurons(std::span<const NeuronRecord> records);

// Embeddings as JSONL ({"t":..,"v":[..]}) or TSV (token<TAB>v1<TAB>v2...).
// The format is detected from the first non-blank line.
EmbeddingTable parse_embeddings(std::istream& in);
EmbeddingTable load_embeddings(const std::filesystem::path& path);
std::string serialize_embeddings(const EmbeddingTable& table);

struct NeuronCoverage {
  NeuronId id;
  std::size_t total = 0;
  std::size_t present = 0;
  std::vector<std::string> missing;  // in core-token order
};

std::vector<NeuronCoverage> join_coverage(std::span<const NeuronRecord> neurons,
                                          const EmbeddingTable& embeddings);

// Canonical ordering used everywhere: stable sort by activation, descending.
void sort_core_tokens(NeuronRecord& record);

// Throws ValidationError if a record breaks its invariants.
void validate(const NeuronRecord& record, std::size_t line = 0);

}  // namespace neurocat
