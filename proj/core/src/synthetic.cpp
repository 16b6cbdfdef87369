#include "neurocat/synthetic.hpp"

#include <cmath>
#include <fstream>
#include <istream>

#include "json.hpp"
#include "neurocat/errors.hpp"
#include "neurocat/random.hpp"

namespace neurocat {

using ordered_json = nlohmann::ordered_json;

std::string_view to_string(SynthMode m) {
  switch (m) {
    case SynthMode::null: return "null";
    case SynthMode::attentive: return "attentive";
    case SynthMode::banded: return "banded";
  }
  return "null";
}

SynthMode parse_synth_mode(std::string_view s) {
  if (s == "null") return SynthMode::null;
  if (s == "attentive") return SynthMode::attentive;
  if (s == "banded") return SynthMode::banded;
  throw InvalidArgument("unknown synth mode '" + std::string(s) + "'");
}

void SynthSpec::validate() const {
  if (n_blobs < 2) throw InvalidArgument("n_blobs must be >= 2");
  if (!(blob_spread > 0.0)) throw InvalidArgument("blob_spread must be > 0");
  if (!(blob_separation >= 0.0)) throw InvalidArgument("blob_separation must be >= 0");
  if (!(activation_sd > 0.0)) throw InvalidArgument("activation_sd must be > 0");
  if (emb_dim == 0) throw InvalidArgument("emb_dim must be >= 1");
  if (tokens_per_neuron < n_blobs) throw InvalidArgument("tokens_per_neuron must be >= n_blobs");
  if (tokens_per_neuron > kMaxCoreTokens) throw InvalidArgument("tokens_per_neuron must be <= 100");
  if (layer < 0) throw InvalidArgument("layer must be >= 0");
}

SynthCorpus generate(const SynthSpec& spec) {
  spec.validate();
  SynthCorpus corpus;
  corpus.embeddings = EmbeddingTable(spec.emb_dim);
  const std::size_t T = spec.tokens_per_neuron;
  const std::size_t B = spec.n_blobs;
  const std::size_t D = spec.emb_dim;

  for (std::size_t i = 0; i < spec.n_neurons; ++i) {
    Rng rng(derive_seed(spec.seed, i));

    std::vector<std::vector<double>> centers(B, std::vector<double>(D));
    for (auto& c : centers) {
      double norm = 0.0;
      do {
        norm = 0.0;
        for (auto& x : c) {
          x = rng.normal();
          norm += x * x;
        }
      } while (norm == 0.0);
      norm = std::sqrt(norm);
      for (auto& x : c) x = x / norm * spec.blob_separation;
    }

    std::vector<int> blob(T);
    {
      const std::size_t base = T / B, extra = T % B;
      std::size_t j = 0;
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t c = 0; c < base + (b < extra ? 1 : 0); ++c) blob[j++] = static_cast<int>(b);
    }

    GroundTruth truth;
    truth.id = {spec.layer, static_cast<int>(i)};
    std::vector<double> act(T);
    switch (spec.mode) {
      case SynthMode::null:
        for (auto& a : act) a = rng.normal(spec.activation_mean, spec.activation_sd);
        break;
      case SynthMode::attentive:
        truth.designated = static_cast<int>(rng.index(B));
        for (std::size_t j = 0; j < T; ++j) {
          const double shift = blob[j] == truth.designated ? spec.activation_offset : 0.0;
          act[j] = spec.activation_mean + spec.activation_sd * (rng.normal() + shift);
        }
        break;
      case SynthMode::banded: {
        std::vector<std::size_t> band(B);
        for (std::size_t b = 0; b < B; ++b) band[b] = b;
        rng.shuffle(band.begin(), band.end());
        for (std::size_t j = 0; j < T; ++j) {
          const double lo = 2.0 * static_cast<double>(band[static_cast<std::size_t>(blob[j])]);
          act[j] = spec.activation_mean + spec.activation_sd * (lo + 1.6 * rng.uniform());
        }
        break;
      }
    }

    std::vector<double> scale(T, 1.0);
    if (spec.mode == SynthMode::attentive && spec.focus_gain != 0.0) {
      double m = 0.0;
      for (double a : act) m += a;
      m /= static_cast<double>(T);
      double ss = 0.0;
      for (double a : act) ss += (a - m) * (a - m);
      const double sd = std::sqrt(ss / static_cast<double>(T > 1 ? T - 1 : 1));
      for (std::size_t j = 0; j < T; ++j) scale[j] = sd > 0.0 ? std::exp(-spec.focus_gain * (act[j] - m) / sd) : 1.0;
    }

    NeuronRecord rec;
    rec.id = truth.id;
    for (std::size_t j = 0; j < T; ++j) {
      std::string token = " L" + std::to_string(spec.layer) + "N" + std::to_string(i) + "T" + std::to_string(j);
      std::vector<double> v(D);
      const auto& c = centers[static_cast<std::size_t>(blob[j])];
      for (std::size_t d = 0; d < D; ++d) v[d] = c[d] + spec.blob_spread * scale[j] * rng.normal();
      corpus.embeddings.add(token, std::move(v));
      truth.blob.emplace(token, blob[j]);
      rec.core_tokens.push_back({std::move(token), act[j]});
    }
    sort_core_tokens(rec);
    validate(rec);
    corpus.neurons.push_back(std::move(rec));
    corpus.truth.push_back(std::move(truth));
  }
  return corpus;
}

std::string serialize_truth(std::span<const GroundTruth> truth) {
  std::string out;
  for (const auto& t : truth) {
    ordered_json j;
    j["layer"] = t.id.layer;
    j["neuron"] = t.id.index;
    j["designated"] = t.designated;
    j["blobs"] = t.blob;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<GroundTruth> parse_truth(std::istream& in) {
  std::vector<GroundTruth> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(text);
      GroundTruth t;
      t.id = {j.at("layer").get<int>(), j.at("neuron").get<int>()};
      t.designated = j.value("designated", -1);
      t.blob = j.at("blobs").get<std::map<std::string, int>>();
      out.push_back(std::move(t));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line, e.what());
    }
  }
  return out;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

}  // namespace

void write_corpus(const SynthCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_text(dir / "neurons.jsonl", serialize_neurons(corpus.neurons));
  write_text(dir / "embeddings.jsonl", serialize_embeddings(corpus.embeddings));
  write_text(dir / "truth.jsonl", serialize_truth(corpus.truth));
}

Partition ground_truth_partition(const NeuronRecord& neuron, const GroundTruth& truth) {
  std::map<int, std::vector<TokenActivation>> groups;
  for (const auto& t : neuron.core_tokens) {
    auto it = truth.blob.find(t.token);
    if (it == truth.blob.end()) throw InvalidArgument("token '" + t.token + "' has no ground-truth blob");
    groups[it->second].push_back(t);
  }
  std::vector<std::vector<TokenActivation>> raw;
  for (auto& [_, g] : groups) raw.push_back(std::move(g));
  return make_partition(PartitionKind::categorical, std::move(raw));
}

}  // namespace neurocat
