#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "neurocat/data_model.hpp"
#include "neurocat/errors.hpp"
#include "neurocat/interleaving.hpp"
#include "neurocat/stats.hpp"
#include "neurocat/synthetic.hpp"

using namespace neurocat;

TEST_SUITE("synthetic") {
  TEST_CASE("same seed, same corpus; different seed, different corpus") {
    SynthSpec spec;
    spec.n_neurons = 5;
    spec.mode = SynthMode::attentive;
    const auto a = generate(spec);
    const auto b = generate(spec);
    CHECK(serialize_neurons(a.neurons) == serialize_neurons(b.neurons));
    CHECK(serialize_embeddings(a.embeddings) == serialize_embeddings(b.embeddings));
    CHECK(serialize_truth(a.truth) == serialize_truth(b.truth));
    spec.seed = 8;
    CHECK(serialize_neurons(generate(spec).neurons) != serialize_neurons(a.neurons));
  }

  TEST_CASE("corpus shape follows the requested sizes") {
    SynthSpec spec;
    spec.n_neurons = 3;
    spec.tokens_per_neuron = 40;
    spec.emb_dim = 7;
    spec.layer = 4;
    const auto c = generate(spec);
    REQUIRE(c.neurons.size() == 3);
    CHECK(c.embeddings.dim() == 7);
    for (const auto& n : c.neurons) {
      CHECK(n.id.layer == 4);
      CHECK(n.core_tokens.size() == 40);
      for (std::size_t i = 1; i < n.core_tokens.size(); ++i)
        CHECK(n.core_tokens[i - 1].activation >= n.core_tokens[i].activation);
      for (const auto& t : n.core_tokens) CHECK(c.embeddings.contains(t.token));
    }
  }

  TEST_CASE("written files load and validate") {
    testing::TempDir dir("synth");
    SynthSpec spec;
    spec.n_neurons = 4;
    spec.mode = SynthMode::banded;
    const auto c = generate(spec);
    write_corpus(c, dir.path());
    const auto neurons = load_neurons(dir / "neurons.jsonl");
    CHECK(neurons == c.neurons);
    const auto emb = load_embeddings(dir / "embeddings.jsonl");
    CHECK(emb.size() == c.embeddings.size());
    std::istringstream truth(testing::read_file(dir / "truth.jsonl"));
    CHECK(serialize_truth(parse_truth(truth)) == serialize_truth(c.truth));
  }

  TEST_CASE("banded corpus: every planted blob covers only itself") {
    SynthSpec spec;
    spec.n_neurons = 20;
    spec.mode = SynthMode::banded;
    const auto c = generate(spec);
    for (std::size_t i = 0; i < c.neurons.size(); ++i) {
      const auto p = ground_truth_partition(c.neurons[i], c.truth[i]);
      CHECK(p.token_count() == spec.tokens_per_neuron);
      for (std::size_t g = 0; g < p.groups.size(); ++g) CHECK(interleave_cell(p, g).rho == 1.0);
    }
  }

  TEST_CASE("attentive corpus: the designated blob has the highest mean") {
    SynthSpec spec;
    spec.n_neurons = 20;
    spec.mode = SynthMode::attentive;
    const auto c = generate(spec);
    std::size_t top = 0;
    for (std::size_t i = 0; i < c.neurons.size(); ++i) {
      REQUIRE(c.truth[i].designated >= 0);
      const auto p = ground_truth_partition(c.neurons[i], c.truth[i]);
      const auto& best = p.groups.back();
      if (c.truth[i].blob.at(best.members.front().token) == c.truth[i].designated) ++top;
    }
    CHECK(top == c.neurons.size());
  }

  TEST_CASE("invalid specs are rejected") {
    SynthSpec spec;
    spec.n_blobs = 1;
    CHECK_THROWS_AS(spec.validate(), InvalidArgument);
    spec = SynthSpec{};
    spec.tokens_per_neuron = 101;
    CHECK_THROWS_AS(spec.validate(), InvalidArgument);
    CHECK_THROWS_AS(parse_synth_mode("wild"), InvalidArgument);
    CHECK(parse_synth_mode("banded") == SynthMode::banded);
  }
}
