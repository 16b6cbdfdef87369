#include "neurocat/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <limits>
#include <set>
#include <unordered_set>

#include "json.hpp"
#include "neurocat/errors.hpp"

namespace neurocat {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

bool blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

// Activations may be numbers or the strings "NaN"/"Infinity"/"-Infinity"
// some exporters emit; the latter parse but fail validation.
double read_number(const json& v, std::size_t line, const char* what) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    const auto s = v.get<std::string>();
    if (s == "NaN" || s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "Infinity" || s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-Infinity" || s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  throw ParseError(line, std::string(what) + " must be a number");
}

NeuronRecord parse_neuron_line(const std::string& text, std::size_t line) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(line, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError(line, "expected a JSON object");
  for (const char* key : {"layer", "neuron", "core_tokens"}) {
    if (!j.contains(key)) throw ParseError(line, std::string("missing field '") + key + "'");
  }
  if (!j["layer"].is_number_integer() || !j["neuron"].is_number_integer())
    throw ParseError(line, "'layer' and 'neuron' must be integers");
  if (!j["core_tokens"].is_array()) throw ParseError(line, "'core_tokens' must be an array");

  NeuronRecord rec;
  rec.id.layer = j["layer"].get<int>();
  rec.id.index = j["neuron"].get<int>();
  if (rec.id.layer < 0 || rec.id.index < 0) throw ValidationError(line, "layer and neuron must be >= 0");
  rec.core_tokens.reserve(j["core_tokens"].size());
  for (const auto& tok : j["core_tokens"]) {
    if (!tok.is_object() || !tok.contains("t") || !tok.contains("a"))
      throw ParseError(line, "core token must be an object with 't' and 'a'");
    if (!tok["t"].is_string()) throw ParseError(line, "token 't' must be a string");
    rec.core_tokens.push_back({tok["t"].get<std::string>(), read_number(tok["a"], line, "activation 'a'")});
  }
  validate(rec, line);
  sort_core_tokens(rec);
  return rec;
}

std::vector<double> parse_vector_json(const json& v, std::size_t line) {
  if (!v.is_array()) throw ParseError(line, "'v' must be an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& x : v) out.push_back(read_number(x, line, "vector component"));
  return out;
}

}  // namespace

std::string to_string(const NeuronId& id) {
  return std::to_string(id.layer) + "/" + std::to_string(id.index);
}

void EmbeddingTable::add(std::string token, std::vector<double> vector) {
  if (dim_ == 0) {
    if (vector.empty()) throw DimensionError("embedding for '" + token + "' is empty");
    dim_ = vector.size();
  }
  if (vector.size() != dim_) {
    throw DimensionError("embedding for '" + token + "' has dimension " + std::to_string(vector.size()) +
                         ", expected " + std::to_string(dim_));
  }
  bool nonzero = false;
  for (double x : vector) {
    if (!std::isfinite(x)) throw ValidationError("embedding for '" + token + "' has a non-finite component");
    nonzero |= (x != 0.0);
  }
  if (!nonzero) throw ValidationError("embedding for '" + token + "' is the zero vector");
  if (rows_.contains(token)) throw DuplicateError("duplicate embedding for '" + token + "'");
  order_.push_back(token);
  rows_.emplace(std::move(token), std::move(vector));
}

const std::vector<double>* EmbeddingTable::find(std::string_view token) const {
  auto it = rows_.find(token);
  return it == rows_.end() ? nullptr : &it->second;
}

void sort_core_tokens(NeuronRecord& record) {
  std::stable_sort(record.core_tokens.begin(), record.core_tokens.end(),
                   [](const TokenActivation& a, const TokenActivation& b) { return a.activation > b.activation; });
}

void validate(const NeuronRecord& record, std::size_t line) {
  if (record.core_tokens.size() > kMaxCoreTokens) {
    throw ValidationError(line, "neuron " + to_string(record.id) + " has " +
                                    std::to_string(record.core_tokens.size()) + " core-tokens (max " +
                                    std::to_string(kMaxCoreTokens) + ")");
  }
  std::unordered_set<std::string_view> seen;
  for (const auto& t : record.core_tokens) {
    if (t.token.empty()) throw ValidationError(line, "empty token in neuron " + to_string(record.id));
    if (!std::isfinite(t.activation))
      throw ValidationError(line, "non-finite activation for token '" + t.token + "' in neuron " + to_string(record.id));
    if (!seen.insert(t.token).second)
      throw ValidationError(line, "duplicate token '" + t.token + "' in neuron " + to_string(record.id));
  }
}

std::vector<NeuronRecord> parse_neurons(std::istream& in) {
  std::vector<NeuronRecord> out;
  std::set<NeuronId> ids;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (blank(text)) continue;
    auto rec = parse_neuron_line(text, line);
    if (!ids.insert(rec.id).second) throw DuplicateError(line, "duplicate neuron " + to_string(rec.id));
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<NeuronRecord> load_neurons(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_neurons(in);
}

std::string serialize_neuron(const NeuronRecord& record) {
  ordered_json j;
  j["layer"] = record.id.layer;
  j["neuron"] = record.id.index;
  auto tokens = ordered_json::array();
  for (const auto& t : record.core_tokens) {
    ordered_json o;
    o["t"] = t.token;
    o["a"] = t.activation;
    tokens.push_back(std::move(o));
  }
  j["core_tokens"] = std::move(tokens);
  return j.dump();
}

std::string serialize_neurons(std::span<const NeuronRecord> records) {
  std::string out;
  for (const auto& r : records) {
    out += serialize_neuron(r);
    out += '\n';
  }
  return out;
}

EmbeddingTable parse_embeddings(std::istream& in) {
  EmbeddingTable table;
  std::string text;
  std::size_t line = 0;
  enum class Format { unknown, jsonl, tsv } format = Format::unknown;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (blank(text)) continue;
    if (format == Format::unknown) {
      auto first = text.find_first_not_of(" \t");
      format = text[first] == '{' ? Format::jsonl : Format::tsv;
    }
    std::string token;
    std::vector<double> vec;
    if (format == Format::jsonl) {
      json j;
      try {
        j = json::parse(text);
      } catch (const json::parse_error& e) {
        throw ParseError(line, std::string("invalid JSON: ") + e.what());
      }
      if (!j.is_object() || !j.contains("t") || !j.contains("v") || !j["t"].is_string())
        throw ParseError(line, "expected {\"t\": string, \"v\": [numbers]}");
      token = j["t"].get<std::string>();
      vec = parse_vector_json(j["v"], line);
    } else {
      auto tab = text.find('\t');
      if (tab == std::string::npos) throw ParseError(line, "expected token<TAB>values");
      token = text.substr(0, tab);
      std::size_t pos = tab + 1;
      while (pos <= text.size()) {
        auto next = text.find('\t', pos);
        auto field = text.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
        try {
          std::size_t used = 0;
          vec.push_back(std::stod(field, &used));
          if (used != field.size()) throw std::invalid_argument(field);
        } catch (const std::exception&) {
          throw ParseError(line, "bad number '" + field + "'");
        }
        if (next == std::string::npos) break;
        pos = next + 1;
      }
    }
    try {
      table.add(std::move(token), std::move(vec));
    } catch (const DimensionError& e) {
      throw DimensionError(line, e.what());
    } catch (const DuplicateError& e) {
      throw DuplicateError(line, e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(line, e.what());
    }
  }
  return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_embeddings(in);
}

std::string serialize_embeddings(const EmbeddingTable& table) {
  std::string out;
  for (const auto& token : table.tokens()) {
    ordered_json j;
    j["t"] = token;
    j["v"] = *table.find(token);
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<NeuronCoverage> join_coverage(std::span<const NeuronRecord> neurons, const EmbeddingTable& embeddings) {
  std::vector<NeuronCoverage> report;
  report.reserve(neurons.size());
  for (const auto& n : neurons) {
    NeuronCoverage c;
    c.id = n.id;
    c.total = n.core_tokens.size();
    for (const auto& t : n.core_tokens) {
      if (embeddings.contains(t.token))
        ++c.present;
      else
        c.missing.push_back(t.token);
    }
    report.push_back(std::move(c));
  }
  return report;
}

}  // namespace neurocat
