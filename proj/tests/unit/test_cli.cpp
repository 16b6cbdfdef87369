#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "neurocat/cli.hpp"
#include "neurocat/report.hpp"

using namespace neurocat;

namespace {

struct Run {
  int code = 0;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "neurocat");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit 64") {
    const auto r = cli({"topdown", "--no-such-flag"});
    CHECK(r.code == 64);
    CHECK_FALSE(r.err.empty());
    CHECK(cli({"topdown", "--out-dir", "x", "--backend", "telepathy"}).code == 64);
    CHECK(cli({"--help"}).code == 0);
  }

  TEST_CASE("validate reports the offending line and exits 1") {
    testing::TempDir dir("cli_validate");
    testing::write_file(dir / "neurons.jsonl",
                        "{\"layer\":0,\"neuron\":1,\"core_tokens\":[{\"t\":\"a\",\"a\":1.0}]}\n"
                        "{\"layer\":0,\"neuron\":2,\"core_tokens\":[{\"t\":\"a\",\"a\":\"NaN\"}]}\n");
    testing::write_file(dir / "embeddings.jsonl", "{\"t\":\"a\",\"v\":[1.0,0.0]}\n");
    const auto r = cli({"validate", "--out-dir", dir.path().string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("line 2") != std::string::npos);
  }

  TEST_CASE("missing input file is a runtime error") {
    testing::TempDir dir("cli_missing");
    CHECK(cli({"topdown", "--out-dir", dir.path().string()}).code != 0);
  }

  TEST_CASE("synth, analyses and report produce the documented files") {
    testing::TempDir dir("cli_pipeline");
    const auto d = dir.path().string();
    REQUIRE(cli({"synth", "--out-dir", d, "--mode", "attentive", "--n-neurons", "20", "--seed", "3"}).code == 0);
    REQUIRE(cli({"validate", "--out-dir", d}).code == 0);
    REQUIRE(cli({"topdown", "--out-dir", d, "--deterministic"}).code == 0);
    REQUIRE(cli({"interleave", "--out-dir", d, "--deterministic"}).code == 0);
    REQUIRE(cli({"bottomup", "--out-dir", d, "--deterministic"}).code == 0);
    REQUIRE(cli({"report", "--out-dir", d, "--deterministic"}).code == 0);

    const auto td = parse_csv(testing::read_file(dir / "topdown_embedding_L0.csv"));
    CHECK(td.header.front() == "mu_K1");
    CHECK(td.header.back() == "pi_pK1K5");
    const auto bu = parse_csv(testing::read_file(dir / "bottomup_quartile_L0.csv"));
    CHECK(bu.rows.size() == 4);
    CHECK(std::filesystem::exists(dir / "interleaving_embedding_L0.csv"));
    CHECK(std::filesystem::exists(dir / "topdown_embedding.jsonl"));
    CHECK(std::filesystem::exists(dir / "report.md"));
    CHECK(std::filesystem::exists(dir / "manifest.json"));
    const auto manifest = testing::read_file(dir / "manifest.json");
    for (const char* stage : {"topdown_embedding", "interleaving_embedding", "bottomup_quartile", "report"})
      CHECK(manifest.find(stage) != std::string::npos);
  }

  TEST_CASE("deterministic reruns are byte-identical") {
    testing::TempDir a("cli_det_a"), b("cli_det_b");
    for (const auto* dir : {&a, &b}) {
      const auto d = dir->path().string();
      REQUIRE(cli({"synth", "--out-dir", d, "--n-neurons", "15", "--seed", "5"}).code == 0);
      REQUIRE(cli({"topdown", "--out-dir", d, "--deterministic", "--jobs", "1"}).code == 0);
      REQUIRE(cli({"bottomup", "--out-dir", d, "--deterministic"}).code == 0);
    }
    for (const char* f : {"topdown_embedding_L0.csv", "bottomup_quartile_L0.csv", "topdown_embedding.jsonl",
                          "manifest.json"})
      CHECK(testing::read_file(a / f) == testing::read_file(b / f));
  }

  TEST_CASE("oracle subcommand") {
    const auto r = cli({"oracle"});
    CHECK(r.code == 0);
    CHECK(r.out.find("all gated oracle checks passed") != std::string::npos);
  }
}
