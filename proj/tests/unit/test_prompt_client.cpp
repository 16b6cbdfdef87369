#include <atomic>
#include <cstdlib>
#include <mutex>
#include <thread>

#include "doctest.h"
#include "helpers.hpp"
#include "httplib.h"
#include "json.hpp"
#include "neurocat/errors.hpp"
#include "neurocat/partition_source.hpp"
#include "neurocat/prompt_client.hpp"
#include "neurocat/random.hpp"
#include "neurocat/synthetic.hpp"

using namespace neurocat;
using json = nlohmann::json;

namespace {

// Two well separated blobs of five tokens each.
EmbeddingTable two_blobs(std::vector<std::string>& tokens) {
  EmbeddingTable emb(3);
  Rng rng(5);
  for (int b = 0; b < 2; ++b)
    for (int j = 0; j < 5; ++j) {
      const std::string t = " blob" + std::to_string(b) + "_" + std::to_string(j);
      emb.add(t, {b ? 8.0 + 0.2 * rng.normal() : 0.2 * rng.normal(), 1.0 + 0.2 * rng.normal(), b ? -4.0 : 4.0});
      tokens.push_back(t);
    }
  return emb;
}

std::string completion(const std::string& content) {
  return json{{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}})}}.dump();
}

// Local chat-completions stand-in. `reply` decides each answer.
struct FakeEndpoint {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<int> calls{0};
  std::atomic<int> in_flight{0};
  std::atomic<int> max_in_flight{0};
  std::mutex mu;
  std::vector<json> bodies;
  std::vector<std::string> auth;

  explicit FakeEndpoint(std::function<void(int, const json&, httplib::Response&)> reply) {
    server.Post("/v1/chat/completions", [this, reply](const httplib::Request& req, httplib::Response& res) {
      const int n = ++calls;
      const int now = ++in_flight;
      int prev = max_in_flight.load();
      while (now > prev && !max_in_flight.compare_exchange_weak(prev, now)) {
      }
      const auto body = json::parse(req.body);
      {
        std::lock_guard lock(mu);
        bodies.push_back(body);
        auth.push_back(req.get_header_value("Authorization"));
      }
      reply(n, body, res);
      --in_flight;
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~FakeEndpoint() {
    server.stop();
    thread.join();
  }

  EndpointConfig config() const {
    EndpointConfig c;
    c.base_url = "http://127.0.0.1:" + std::to_string(port);
    c.initial_backoff = std::chrono::milliseconds(1);
    c.timeout = std::chrono::seconds(5);
    c.api_key_env = "NEUROCAT_TEST_PROMPT_KEY";
    return c;
  }
};

// Answers with the user's tokens split in half.
void split_reply(int, const json& body, httplib::Response& res) {
  const auto user = json::parse(body["messages"][1]["content"].get<std::string>());
  json assignments;
  const auto& toks = user["tokens"];
  for (std::size_t i = 0; i < toks.size(); ++i) assignments[toks[i].get<std::string>()] = i < toks.size() / 2 ? 1 : 2;
  res.set_content(completion(json{{"assignments", assignments}}.dump()), "application/json");
}

}  // namespace

TEST_SUITE("prompt_client") {
  TEST_CASE("stub: two planted blobs, k = 2, recovers blob membership") {
    std::vector<std::string> tokens;
    const auto emb = two_blobs(tokens);
    StubClusterClient stub(emb, 42);
    const auto resp = stub.cluster({tokens, 2, "catseg-v1"});
    CHECK(resp.unassigned.empty());
    REQUIRE(resp.assignments.size() == 10);
    for (const auto& t : tokens) {
      const int expect_same = resp.assignments.at(tokens[t[5] == '0' ? 0 : 5]);
      CHECK(resp.assignments.at(t) == expect_same);
    }
    CHECK(resp.assignments.at(tokens[0]) != resp.assignments.at(tokens[5]));
  }

  TEST_CASE("stub: identical input gives identical output") {
    std::vector<std::string> tokens;
    const auto emb = two_blobs(tokens);
    StubClusterClient a(emb, 42), b(emb, 42);
    const auto r1 = a.cluster({tokens, 3, "catseg-v1"});
    const auto r2 = b.cluster({tokens, 3, "catseg-v1"});
    CHECK(r1.assignments == r2.assignments);
    CHECK(r1.metadata == r2.metadata);
  }

  TEST_CASE("stub: planted five-blob synthetic neurons give the five blobs") {
    SynthSpec spec;
    spec.n_neurons = 10;
    spec.blob_separation = 6.0;
    spec.blob_spread = 0.5;
    const auto corpus = generate(spec);
    StubClusterClient stub(corpus.embeddings, 1);
    for (std::size_t i = 0; i < corpus.neurons.size(); ++i) {
      ClusterRequest req;
      for (const auto& t : corpus.neurons[i].core_tokens) req.tokens.push_back(t.token);
      const auto resp = stub.cluster(req);
      CHECK(resp.group_count() == 5);
      std::map<int, int> blob_of_group;
      bool consistent = true;
      for (const auto& [tok, g] : resp.assignments) {
        const int blob = corpus.truth[i].blob.at(tok);
        auto [it, fresh] = blob_of_group.emplace(g, blob);
        if (!fresh && it->second != blob) consistent = false;
      }
      CHECK(consistent);
    }
  }

  TEST_CASE("stub: k above the distinct embeddings is a recorded degenerate response") {
    EmbeddingTable emb(2);
    emb.add("a", {1, 0});
    emb.add("b", {1, 0});
    emb.add("c", {0, 1});
    StubClusterClient stub(emb, 3);
    const auto resp = stub.cluster({{"a", "b", "c"}, 3, "catseg-v1"});
    CHECK(resp.group_count() == 2);
    CHECK(resp.metadata.find("degenerate") != std::string::npos);
  }

  TEST_CASE("stub: tokens without embeddings are unassigned") {
    std::vector<std::string> tokens;
    const auto emb = two_blobs(tokens);
    auto req_tokens = tokens;
    req_tokens.insert(req_tokens.begin() + 2, " ghost");
    StubClusterClient stub(emb, 1);
    const auto resp = stub.cluster({req_tokens, 2, "catseg-v1"});
    CHECK(resp.unassigned == std::vector<std::string>{" ghost"});
    CHECK(resp.assignments.size() == 10);
  }

  TEST_CASE("model output parsing") {
    const ClusterRequest req{{"a", " b", "c", "d", "e"}, 2, "catseg-v1"};
    const auto ok = parse_model_output(req, "```json\n{\"assignments\": {\"a\": 1, \" b\": 2, \"c\": 2}}\n```");
    CHECK(ok.assignments.size() == 3);
    CHECK(ok.unassigned == std::vector<std::string>{"d", "e"});
    CHECK_THROWS_AS(parse_model_output(req, "{\"assignments\": {\"zebra\": 1}}"), ValidationError);
    CHECK_THROWS_AS(parse_model_output(req, "{\"assignments\": {\"a\": 3}}"), ValidationError);
    CHECK_THROWS_AS(parse_model_output(req, "Sure! Here are the groups."), BackendFormatError);
    CHECK_THROWS_AS(parse_model_output(req, "{\"groups\": []}"), BackendFormatError);
  }

  TEST_CASE("missing tokens reduce N downstream") {
    std::vector<double> acts;
    for (int i = 0; i < 100; ++i) acts.push_back(100 - i);
    const auto neuron = testing::make_neuron(acts);
    ClusterRequest req;
    for (const auto& t : neuron.core_tokens) req.tokens.push_back(t.token);
    req.k = 2;
    json assignments;
    for (std::size_t i = 4; i < req.tokens.size(); ++i) assignments[req.tokens[i]] = i % 2 + 1;
    const auto resp = parse_model_output(req, json{{"assignments", assignments}}.dump());
    CHECK(resp.unassigned.size() == 4);
    CHECK(partition_from_response(neuron, resp).token_count() == 96);
  }

  TEST_CASE("remote: request shape, credential from environment, parsed response") {
    ::setenv("NEUROCAT_TEST_PROMPT_KEY", "sk-test", 1);
    FakeEndpoint fake(split_reply);
    RemoteClusterClient client(fake.config());
    const auto resp = client.cluster({{"x", "y", "z", "w"}, 2, "catseg-v1"});
    CHECK(resp.assignments.size() == 4);
    CHECK(resp.group_count() == 2);
    REQUIRE(fake.bodies.size() == 1);
    const auto& body = fake.bodies[0];
    CHECK(body["model"] == "gpt-4o");
    CHECK(body["messages"][0]["role"] == "system");
    CHECK(body["messages"][0]["content"] == std::string(prompt_template("catseg-v1")));
    CHECK(fake.auth[0] == "Bearer sk-test");
    CHECK(resp.metadata.find("catseg-v1") != std::string::npos);
    ::unsetenv("NEUROCAT_TEST_PROMPT_KEY");
  }

  TEST_CASE("remote: retries on server errors, then succeeds") {
    FakeEndpoint fake([](int n, const json& body, httplib::Response& res) {
      if (n < 3) {
        res.status = 503;
        return;
      }
      split_reply(n, body, res);
    });
    RemoteClusterClient client(fake.config());
    const auto resp = client.cluster({{"x", "y"}, 2, "catseg-v1"});
    CHECK(fake.calls == 3);
    CHECK(resp.metadata.find("attempts=3") != std::string::npos);
  }

  TEST_CASE("remote: gives up after three attempts with a transport error") {
    FakeEndpoint fake([](int, const json&, httplib::Response& res) { res.status = 500; });
    RemoteClusterClient client(fake.config());
    CHECK_THROWS_AS(client.cluster({{"x", "y"}, 2, "catseg-v1"}), TransportError);
    CHECK(fake.calls == 3);
  }

  TEST_CASE("remote: client errors are not retried") {
    FakeEndpoint fake([](int, const json&, httplib::Response& res) { res.status = 401; });
    RemoteClusterClient client(fake.config());
    CHECK_THROWS_AS(client.cluster({{"x", "y"}, 2, "catseg-v1"}), TransportError);
    CHECK(fake.calls == 1);
  }

  TEST_CASE("remote: unreachable endpoint is a transport error") {
    EndpointConfig c;
    c.base_url = "http://127.0.0.1:1";
    c.initial_backoff = std::chrono::milliseconds(1);
    c.timeout = std::chrono::seconds(1);
    RemoteClusterClient client(c);
    CHECK_THROWS_AS(client.cluster({{"x", "y"}, 2, "catseg-v1"}), TransportError);
  }

  TEST_CASE("remote: unparseable output is retried, then a backend-format error") {
    FakeEndpoint fake([](int, const json&, httplib::Response& res) {
      res.set_content(completion("I cannot help with that."), "application/json");
    });
    RemoteClusterClient client(fake.config());
    CHECK_THROWS_AS(client.cluster({{"x", "y"}, 2, "catseg-v1"}), BackendFormatError);
    CHECK(fake.calls == 3);
  }

  TEST_CASE("remote: invented tokens are a validation error") {
    FakeEndpoint fake([](int, const json&, httplib::Response& res) {
      res.set_content(completion(R"({"assignments": {"x": 1, "invented": 2}})"), "application/json");
    });
    RemoteClusterClient client(fake.config());
    CHECK_THROWS_AS(client.cluster({{"x", "y"}, 2, "catseg-v1"}), ValidationError);
  }

  TEST_CASE("remote: concurrency bound and token redaction in logs") {
    FakeEndpoint fake([](int n, const json& body, httplib::Response& res) {
      std::this_thread::sleep_for(std::chrono::milliseconds(30));
      split_reply(n, body, res);
    });
    auto cfg = fake.config();
    cfg.max_concurrency = 2;
    cfg.redact_tokens = true;
    std::mutex log_mu;
    std::vector<std::string> logs;
    cfg.log = [&](std::string_view s) {
      std::lock_guard lock(log_mu);
      logs.emplace_back(s);
    };
    RemoteClusterClient client(cfg);
    std::vector<std::thread> threads;
    for (int i = 0; i < 6; ++i)
      threads.emplace_back([&client] { client.cluster({{"secret_token", "other"}, 2, "catseg-v1"}); });
    for (auto& t : threads) t.join();
    CHECK(fake.calls == 6);
    CHECK(fake.max_in_flight <= 2);
    for (const auto& l : logs)
      if (l.starts_with("request")) CHECK(l.find("secret_token") == std::string::npos);
  }

  TEST_CASE("swapping the backend keeps the partition type") {
    std::vector<std::string> tokens;
    const auto emb = two_blobs(tokens);
    NeuronRecord n;
    for (std::size_t i = 0; i < tokens.size(); ++i) n.core_tokens.push_back({tokens[i], static_cast<double>(i)});
    sort_core_tokens(n);
    StubClusterClient stub(emb, 1);
    const PromptPartitionSource prompt(stub, "catseg-v1");
    const EmbeddingPartitionSource embedding(emb);
    const Partition a = prompt.partition(n, 2);
    const Partition b = embedding.partition(n, 2);
    CHECK(a.token_count() == b.token_count());
    CHECK(prompt.id() == "prompt:stub-kmedoids:catseg-v1");
  }
}
