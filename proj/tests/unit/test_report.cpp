#include "doctest.h"
#include "json.hpp"
#include "neurocat/errors.hpp"
#include "neurocat/report.hpp"

using namespace neurocat;
using json = nlohmann::json;

namespace {

TopDownAggregate topdown_fixture() {
  TopDownAggregate agg;
  agg.k = 5;
  agg.n_neuron = 12;
  agg.pi_kw = 75.0;
  agg.mu_cluster = {1.0, 1.5, 2.0, 2.5, 3.25};
  agg.mu_delta = {0.5, 0.5, 0.5, 0.75, 2.25};
  agg.mu_d = {0.1, 0.2, 0.3, 0.4, 1.0};
  agg.pi_pair = {0.0, 10.0, 20.0, 30.0, 90.0};
  return agg;
}

BottomUpAggregate bottomup_fixture() {
  BottomUpAggregate agg;
  agg.n_neuron = 3;
  for (int g = 0; g < 4; ++g)
    agg.rows.push_back({"G" + std::to_string(g + 1), 3, 0.05 * (g + 1), -0.01 * (4 - g), 100.0 - 25 * g, 0.5});
  return agg;
}

}  // namespace

TEST_SUITE("report") {
  TEST_CASE("top-down CSV columns") {
    const auto csv = parse_csv(topdown_csv(topdown_fixture()));
    const std::vector<std::string> header{
        "mu_K1",      "mu_K2",      "mu_K3",      "mu_K4",      "mu_K5",      "delta_K1K2", "delta_K2K3",
        "delta_K3K4", "delta_K4K5", "delta_K1K5", "d_K1K2",     "d_K2K3",     "d_K3K4",     "d_K4K5",
        "d_K1K5",     "n_neuron",   "pi_pKW",     "pi_pK1K2",   "pi_pK2K3",   "pi_pK3K4",   "pi_pK4K5",
        "pi_pK1K5"};
    CHECK(csv.header == header);
    REQUIRE(csv.rows.size() == 1);
    CHECK(csv.rows[0][csv.column("n_neuron")] == "12");
    CHECK(std::stod(csv.rows[0][csv.column("mu_K5")]) == 3.25);
    CHECK_THROWS_AS(csv.column("nope"), InvalidArgument);
  }

  TEST_CASE("interleaving and bottom-up CSV columns") {
    InterleaveAggregate ia;
    ia.n_neuron = 2;
    ia.rows.push_back({"K1", 2, 1.5, 50.0});
    const auto icsv = parse_csv(interleaving_csv(ia));
    CHECK(icsv.header == std::vector<std::string>{"cluster", "n_cells", "mu_rho", "pi_p_chi2"});
    CHECK(icsv.rows[0][0] == "K1");
    const auto bcsv = parse_csv(bottomup_csv(bottomup_fixture()));
    CHECK(bcsv.header ==
          std::vector<std::string>{"group", "n_neuron", "mu_cos", "mu_d", "pi_d_negative", "p_chi2"});
    CHECK(bcsv.rows.size() == 4);
    CHECK(bcsv.rows[3][0] == "G4");
  }

  TEST_CASE("JSONL lines carry the run digest") {
    std::vector<NeuronBottomUpResult> rs(2);
    rs[0].id = {1, 2};
    rs[1].id = {1, 3};
    for (auto& r : rs) {
      r.cos = {0.1, std::nullopt};
      r.d = {-0.2, std::nullopt};
    }
    const auto text = bottomup_jsonl(rs, "abc123");
    std::size_t lines = 0, pos = 0;
    while (pos < text.size()) {
      const auto nl = text.find('\n', pos);
      const auto j = json::parse(text.substr(pos, nl - pos));
      CHECK(j["run_digest"] == "abc123");
      CHECK(j["d_G2"].is_null());
      ++lines;
      pos = nl + 1;
    }
    CHECK(lines == 2);
    const std::vector<NeuronFailure> fails{{{0, 7}, "no embeddings"}};
    const auto f = json::parse(failures_jsonl(fails));
    CHECK(f["error"] == "no embeddings");
  }

  TEST_CASE("renderings are deterministic when asked") {
    const auto csv = parse_csv(bottomup_csv(bottomup_fixture()));
    const std::vector<std::string> cols{"mu_cos"};
    const RenderOptions det{"cos", "digest-1", true};
    const auto a = render_lines(csv, "group", cols, det);
    CHECK(a == render_lines(csv, "group", cols, det));
    CHECK(a.find("<svg") != std::string::npos);
    CHECK(a.find("digest-1") != std::string::npos);
    CHECK(a.find("generated") == std::string::npos);
    const RenderOptions stamped{"cos", "digest-1", false};
    CHECK(render_lines(csv, "group", cols, stamped).find("generated") != std::string::npos);
    const auto bars = render_grouped_bars(csv, "group", cols, det);
    CHECK(bars.find("<rect") != std::string::npos);
    const auto md = render_markdown(csv, det);
    CHECK(md.find("| group |") != std::string::npos);
    CHECK(md.find("digest-1") != std::string::npos);
    CHECK(md == render_markdown(csv, det));
  }

  TEST_CASE("non-finite numbers print as NA") {
    auto agg = topdown_fixture();
    agg.mu_d[0] = std::numeric_limits<double>::quiet_NaN();
    const auto csv = parse_csv(topdown_csv(agg));
    CHECK(csv.rows[0][csv.column("d_K1K2")] == "NA");
  }
}
