#include "neurocat/cli.hpp"

#include <chrono>
#include <csignal>
#include <filesystem>
#include <fmt/format.h>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "neurocat/corpus_runner.hpp"
#include "neurocat/errors.hpp"
#include "neurocat/manifest.hpp"
#include "neurocat/oracle.hpp"
#include "neurocat/report.hpp"
#include "neurocat/service.hpp"
#include "neurocat/synthetic.hpp"

namespace neurocat {

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kRuntime = 2;
constexpr int kUsage = 64;

struct Common {
  std::string neurons;
  std::string embeddings;
  std::string config;
  std::string out_dir;
  std::vector<int> layers;
  std::size_t jobs = 0;
  bool deterministic = false;
};

void add_inputs(CLI::App* cmd, Common& c, bool embeddings) {
  cmd->add_option("--neurons", c.neurons, "Neuron records (JSONL); defaults to <out-dir>/neurons.jsonl");
  if (embeddings)
    cmd->add_option("--embeddings", c.embeddings, "Token embeddings (JSONL or TSV); defaults to <out-dir>/embeddings.jsonl");
  cmd->add_option("--config", c.config, "Run configuration (key=value lines)");
}

void add_run(CLI::App* cmd, Common& c) {
  cmd->add_option("--out-dir", c.out_dir, "Output directory")->required();
  cmd->add_option("--layer", c.layers, "Restrict to these layers (repeatable)");
  cmd->add_option("--jobs", c.jobs, "Worker threads (0 = available parallelism)");
  cmd->add_flag("--deterministic", c.deterministic, "Omit timings and timestamps so reruns are byte-identical");
}

std::string resolve(const std::string& given, const std::string& out_dir, const char* fallback, const char* what) {
  if (!given.empty()) return given;
  if (!out_dir.empty() && fs::exists(fs::path(out_dir) / fallback)) return (fs::path(out_dir) / fallback).string();
  throw InvalidArgument(std::string("--") + what + " is required");
}

RunConfig read_config(const Common& c) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : load_config(c.config);
  cfg.validate();
  return cfg;
}

void write_text(const fs::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Loads the directory's manifest, starting over when it belongs to other
// inputs or another configuration.
RunManifest open_manifest(const fs::path& dir, const RunConfig& cfg, std::map<std::string, std::string> inputs,
                          std::ostream& err) {
  auto m = RunManifest::load_or_new(dir);
  const bool fresh = m.inputs.empty() && m.config_text.empty();
  if (!fresh && (m.inputs != inputs || m.config_text != cfg.to_text())) {
    err << "note: inputs or config differ from " << (dir / kManifestName).string() << "; starting a new manifest\n";
    m = RunManifest{};
  }
  m.tool_version = tool_version();
  m.config_text = cfg.to_text();
  m.inputs = std::move(inputs);
  return m;
}

struct Corpus {
  std::vector<NeuronRecord> neurons;
  std::optional<EmbeddingTable> embeddings;
  std::map<std::string, std::string> inputs;
};

Corpus load_corpus(const Common& c, bool need_embeddings) {
  Corpus corpus;
  const auto np = resolve(c.neurons, c.out_dir, "neurons.jsonl", "neurons");
  corpus.neurons = filter_layers(load_neurons(np), c.layers);
  corpus.inputs["neurons"] = sha256_file(np);
  if (need_embeddings) {
    const auto ep = resolve(c.embeddings, c.out_dir, "embeddings.jsonl", "embeddings");
    corpus.embeddings = load_embeddings(ep);
    corpus.inputs["embeddings"] = sha256_file(ep);
  }
  if (corpus.neurons.empty()) throw InvalidArgument("no neurons to analyze (check --layer)");
  return corpus;
}

std::unique_ptr<ClusterBackend> make_prompt_backend(const RunConfig& cfg, const EmbeddingTable& emb, std::ostream& err) {
  if (cfg.prompt_mode == "remote") {
    EndpointConfig ep;
    ep.base_url = cfg.prompt_endpoint;
    ep.model = cfg.prompt_model;
    ep.api_key_env = cfg.prompt_api_key_env;
    ep.timeout = std::chrono::seconds(cfg.prompt_timeout_seconds);
    ep.max_concurrency = static_cast<std::size_t>(cfg.prompt_concurrency);
    ep.log = [&err](std::string_view line) { err << line << '\n'; };
    return std::make_unique<RemoteClusterClient>(std::move(ep));
  }
  return std::make_unique<StubClusterClient>(emb, cfg.seed);
}

template <class Clock>
std::optional<double> elapsed(const Common& c, typename Clock::time_point start) {
  if (c.deterministic) return std::nullopt;
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string layer_suffix(int layer) { return fmt::format("_L{}", layer); }

// Shared shape of the three corpus analyses: run per layer, write per-layer
// aggregate CSVs plus one JSONL of per-neuron results, record the stage.
template <class Result, class RunFn, class AggFn, class JsonlFn>
int run_analysis(const Common& c, const std::string& stem, const std::string& backend_id, const std::string& template_id,
                 const Corpus& corpus, const RunConfig& cfg, RunFn&& run, AggFn&& aggregate_csv, JsonlFn&& jsonl,
                 std::ostream& out, std::ostream& err) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  const fs::path dir(c.out_dir);
  fs::create_directories(dir);
  auto manifest = open_manifest(dir, cfg, corpus.inputs, err);
  const auto digest = manifest.run_digest();

  CorpusOutcome<Result> outcome = run(std::span<const NeuronRecord>(corpus.neurons));
  StageRecord stage;
  stage.backend = backend_id;
  stage.prompt_template = template_id;
  stage.neurons_in = corpus.neurons.size();
  stage.failures = outcome.failures.size();

  for (const auto& f : outcome.failures) err << "skipped " << to_string(f.id) << ": " << f.message << '\n';

  std::size_t written = 0;
  for (int layer : layers_of(corpus.neurons)) {
    std::vector<Result> subset;
    for (const auto& r : outcome.results)
      if (r.id.layer == layer) subset.push_back(r);
    std::size_t eligible = 0;
    std::string csv;
    try {
      std::tie(csv, eligible) = aggregate_csv(std::span<const Result>(subset));
    } catch (const InvalidArgument& e) {
      err << "layer " << layer << ": no aggregate (" << e.what() << ")\n";
      continue;
    }
    stage.eligible += eligible;
    const auto name = stem + layer_suffix(layer) + ".csv";
    write_text(dir / name, csv);
    stage.artifacts[name] = sha256_hex(csv);
    out << "wrote " << (dir / name).string() << " (" << eligible << " neurons)\n";
    ++written;
  }
  const auto results_text = jsonl(std::span<const Result>(outcome.results), digest);
  write_text(dir / (stem + ".jsonl"), results_text);
  stage.artifacts[stem + ".jsonl"] = sha256_hex(results_text);
  const auto failures_text = failures_jsonl(outcome.failures);
  write_text(dir / (stem + "_failures.jsonl"), failures_text);
  stage.artifacts[stem + "_failures.jsonl"] = sha256_hex(failures_text);

  stage.seconds = elapsed<Clock>(c, start);
  manifest.stages[stem] = std::move(stage);
  manifest.save(dir);
  if (written == 0) {
    err << "error: no layer produced an aggregate\n";
    return kRuntime;
  }
  return kOk;
}

int cmd_validate(const Common& c, std::ostream& out, std::ostream& err) {
  const auto cfg = read_config(c);
  (void)cfg;
  const auto np = resolve(c.neurons, c.out_dir, "neurons.jsonl", "neurons");
  std::vector<NeuronRecord> neurons;
  try {
    neurons = load_neurons(np);
  } catch (const Error& e) {
    err << np << ": " << e.what() << '\n';
    throw ValidationError(0, "validation failed");
  }
  out << np << ": " << neurons.size() << " neurons in " << layers_of(neurons).size() << " layer(s)\n";
  if (!c.embeddings.empty() || (!c.out_dir.empty() && fs::exists(fs::path(c.out_dir) / "embeddings.jsonl"))) {
    const auto ep = resolve(c.embeddings, c.out_dir, "embeddings.jsonl", "embeddings");
    EmbeddingTable emb;
    try {
      emb = load_embeddings(ep);
    } catch (const Error& e) {
      err << ep << ": " << e.what() << '\n';
      throw ValidationError(0, "validation failed");
    }
    std::size_t total = 0, present = 0, incomplete = 0;
    for (const auto& cov : join_coverage(neurons, emb)) {
      total += cov.total;
      present += cov.present;
      if (cov.present < cov.total) ++incomplete;
    }
    out << ep << ": " << emb.size() << " tokens, dim " << emb.dim() << "; coverage " << present << "/" << total
        << " core-tokens, " << incomplete << " neuron(s) with missing embeddings\n";
  }
  return kOk;
}

int cmd_oracle(std::uint64_t seed, std::ostream& out) {
  const auto report = oracle::run_suite(seed);
  out << report.to_text();
  return report.passed() ? kOk : kValidation;
}

int cmd_synth(const Common& c, SynthSpec spec, std::ostream& out, std::ostream& err) {
  spec.validate();
  const auto corpus = generate(spec);
  const fs::path dir(c.out_dir);
  fs::create_directories(dir);
  write_corpus(corpus, dir);
  // The corpus files are the inputs of later stages in this directory.
  RunConfig cfg = c.config.empty() ? RunConfig{} : load_config(c.config);
  std::map<std::string, std::string> inputs{{"neurons", sha256_file(dir / "neurons.jsonl")},
                                            {"embeddings", sha256_file(dir / "embeddings.jsonl")}};
  auto manifest = open_manifest(dir, cfg, inputs, err);
  StageRecord stage;
  stage.backend = std::string("synth:") + std::string(to_string(spec.mode));
  stage.neurons_in = spec.n_neurons;
  for (const char* name : {"neurons.jsonl", "embeddings.jsonl", "truth.jsonl"})
    stage.artifacts[name] = sha256_file(dir / name);
  manifest.stages["synth"] = std::move(stage);
  manifest.save(dir);
  out << "wrote " << spec.n_neurons << " " << to_string(spec.mode) << " neurons to " << dir.string() << '\n';
  return kOk;
}

// Renders every aggregate CSV in the directory. Topdown CSVs of one backend
// are stacked by layer into grouped bars; bottomup CSVs of one segmentation
// become one line per layer across G1..Gk.
int cmd_report(const Common& c, std::ostream& out, std::ostream& err) {
  const fs::path dir(c.out_dir);
  if (!fs::is_directory(dir)) throw InvalidArgument(dir.string() + " is not a directory");
  auto manifest = RunManifest::load_or_new(dir);
  RenderOptions opt;
  opt.run_digest = manifest.run_digest();
  opt.deterministic = c.deterministic;

  std::map<std::string, std::vector<std::pair<int, fs::path>>> families;  // stem -> (layer, csv)
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (entry.path().extension() != ".csv") continue;
    const auto pos = name.rfind("_L");
    if (pos == std::string::npos) continue;
    int layer = 0;
    try {
      layer = std::stoi(name.substr(pos + 2));
    } catch (const std::exception&) {
      continue;
    }
    families[name.substr(0, pos)].emplace_back(layer, entry.path());
  }
  if (families.empty()) {
    err << "no aggregate CSVs in " << dir.string() << '\n';
    return kRuntime;
  }

  StageRecord stage;
  stage.backend = "report";
  std::string index = "# Aggregate report\n\n";
  auto emit = [&](const std::string& name, const std::string& text) {
    write_text(dir / name, text);
    stage.artifacts[name] = sha256_hex(text);
    out << "wrote " << (dir / name).string() << '\n';
  };

  for (auto& [stem, files] : families) {
    std::ranges::sort(files);
    std::vector<std::pair<int, CsvTable>> tables;
    for (const auto& [layer, path] : files) tables.emplace_back(layer, parse_csv(read_text(path)));

    for (const auto& [layer, table] : tables) {
      opt.title = stem + " layer " + std::to_string(layer);
      index += render_markdown(table, opt) + "\n";
    }

    if (stem.starts_with("topdown")) {
      CsvTable stacked;
      stacked.header = {"layer"};
      const auto& first = tables.front().second;
      stacked.header.insert(stacked.header.end(), first.header.begin(), first.header.end());
      for (const auto& [layer, table] : tables) {
        if (table.header != first.header) throw ValidationError(stem + ": CSV headers differ across layers");
        auto row = table.rows.front();
        row.insert(row.begin(), "L" + std::to_string(layer));
        stacked.rows.push_back(std::move(row));
      }
      std::vector<std::string> mu, d;
      for (const auto& h : first.header) {
        if (h.starts_with("mu_K")) mu.push_back(h);
        if (h.starts_with("d_K")) d.push_back(h);
      }
      opt.title = stem + ": mean activation per categorical cluster";
      emit(stem + "_mu.svg", render_grouped_bars(stacked, "layer", mu, opt));
      opt.title = stem + ": Cohen's d per cluster pair";
      emit(stem + "_d.svg", render_grouped_bars(stacked, "layer", d, opt));
    } else if (stem.starts_with("interleaving")) {
      for (const auto& [layer, table] : tables) {
        opt.title = stem + " layer " + std::to_string(layer) + ": mean risk ratio";
        const std::vector<std::string> cols{"mu_rho"};
        emit(stem + layer_suffix(layer) + ".svg", render_grouped_bars(table, "cluster", cols, opt));
      }
    } else if (stem.starts_with("bottomup")) {
      for (const char* metric : {"mu_cos", "mu_d"}) {
        CsvTable lines;
        lines.header = {"group"};
        std::vector<std::string> series;
        for (const auto& [layer, table] : tables) {
          series.push_back("L" + std::to_string(layer));
          lines.header.push_back(series.back());
        }
        const auto& first = tables.front().second;
        for (std::size_t r = 0; r < first.rows.size(); ++r) {
          std::vector<std::string> row{first.rows[r][first.column("group")]};
          for (const auto& [layer, table] : tables) {
            if (table.rows.size() != first.rows.size()) throw ValidationError(stem + ": group count differs across layers");
            row.push_back(table.rows[r][table.column(metric)]);
          }
          lines.rows.push_back(std::move(row));
        }
        opt.title = stem + ": " + metric + " by activation segment";
        emit(stem + "_" + metric + ".svg", render_lines(lines, "group", series, opt));
      }
    }
  }
  emit("report.md", index);
  manifest.stages["report"] = std::move(stage);
  manifest.save(dir);
  return kOk;
}

AnalysisService* g_service = nullptr;

extern "C" void on_signal(int) {
  if (g_service) g_service->stop();
}

int cmd_serve(const Common& c, ServiceOptions opts, std::ostream& out, std::ostream& err) {
  const auto cfg = read_config(c);
  auto corpus = load_corpus(c, true);
  std::unique_ptr<ClusterBackend> remote;
  if (opts.allow_prompt_backend && cfg.prompt_mode == "remote") remote = make_prompt_backend(cfg, *corpus.embeddings, err);
  AnalysisService service(std::move(corpus.neurons), std::move(*corpus.embeddings), cfg, opts, std::move(remote));
  g_service = &service;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  out << "serving on http://" << opts.bind << ":" << opts.port << "/api (digest " << service.digest() << ")\n"
      << std::flush;
  const bool ok = service.listen();
  g_service = nullptr;
  if (!ok) {
    err << "cannot bind " << opts.bind << ":" << opts.port << '\n';
    return kRuntime;
  }
  return kOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"neurocat: activation-space vs categorical-space analyses of transformer neurons", "neurocat"};
  app.require_subcommand(1);
  app.set_version_flag("--version", tool_version());
  app.footer(
      "Exit codes: 0 ok, 1 validation failure, 2 runtime error, 64 usage error.\n"
      "Config files hold key=value lines (alpha, k_categorical, k_activation, min_cluster_size, seed,\n"
      "clustering_backend, activation_segmentation, prompt_mode, prompt_endpoint, prompt_model,\n"
      "prompt_api_key_env, prompt_template, prompt_concurrency, prompt_timeout_seconds).\n"
      "The prompt backend reads its credential from the environment variable named by prompt_api_key_env\n"
      "(default NEUROCAT_PROMPT_API_KEY) and only when prompt_mode=remote; otherwise an offline stub answers.");

  Common c;
  std::string backend, segmentation;
  std::uint64_t oracle_seed = 20240601;
  SynthSpec spec;
  std::string synth_mode = "null";
  ServiceOptions serve_opts;

  auto* validate = app.add_subcommand("validate", "Check neuron and embedding files");
  add_inputs(validate, c, true);
  validate->add_option("--out-dir", c.out_dir, "Directory to look for default input files in");

  auto* topdown = app.add_subcommand("topdown", "Activation differences between categorical clusters");
  add_inputs(topdown, c, true);
  add_run(topdown, c);
  topdown->add_option("--backend", backend, "Clustering backend")->check(CLI::IsMember({"embedding", "prompt"}));

  auto* interleave = app.add_subcommand("interleave", "Activation-span overlap of categorical clusters");
  add_inputs(interleave, c, true);
  add_run(interleave, c);
  interleave->add_option("--backend", backend, "Clustering backend")->check(CLI::IsMember({"embedding", "prompt"}));

  auto* bottomup = app.add_subcommand("bottomup", "Semantic homogeneity of activation segments");
  add_inputs(bottomup, c, true);
  add_run(bottomup, c);
  bottomup->add_option("--segmentation", segmentation, "Activation segmentation")
      ->check(CLI::IsMember({"quartile", "hclust"}));

  auto* synth = app.add_subcommand("synth", "Generate a seeded synthetic corpus");
  synth->add_option("--out-dir", c.out_dir, "Output directory")->required();
  synth->add_option("--config", c.config, "Run configuration recorded in the manifest");
  synth->add_option("--mode", synth_mode, "null | attentive | banded")
      ->check(CLI::IsMember({"null", "attentive", "banded"}));
  synth->add_option("--seed", spec.seed, "Generator seed");
  synth->add_option("--n-neurons", spec.n_neurons, "Number of neurons");
  synth->add_option("--tokens", spec.tokens_per_neuron, "Core-tokens per neuron");
  synth->add_option("--dim", spec.emb_dim, "Embedding dimension");
  synth->add_option("--blobs", spec.n_blobs, "Number of planted blobs");
  synth->add_option("--spread", spec.blob_spread, "Within-blob sd");
  synth->add_option("--separation", spec.blob_separation, "Radius of the blob-center sphere");
  synth->add_option("--offset", spec.activation_offset, "Attentive shift in activation sd units");
  synth->add_option("--focus-gain", spec.focus_gain, "Attentive-mode tightening of high-activation tokens");
  synth->add_option("--layer", spec.layer, "Layer number written into the records");

  auto* orc = app.add_subcommand("oracle", "Compare the main routines against brute-force oracles");
  orc->add_option("--seed", oracle_seed, "Seed for the random instances");

  auto* report = app.add_subcommand("report", "Render aggregate CSVs as Markdown and SVG");
  report->add_option("--out-dir", c.out_dir, "Directory holding the CSVs")->required();
  report->add_flag("--deterministic", c.deterministic, "Omit timestamps");

  auto* serve = app.add_subcommand("serve", "Read-only JSON API over a corpus");
  add_inputs(serve, c, true);
  serve->add_option("--out-dir", c.out_dir, "Directory to look for default input files in");
  serve->add_option("--bind", serve_opts.bind, "Bind address");
  serve->add_option("--port", serve_opts.port, "Port");
  serve->add_flag("--allow-prompt-backend", serve_opts.allow_prompt_backend,
                  "Let backend=prompt requests reach the remote endpoint");
  serve->add_option("--cors-origin", serve_opts.cors_origin, "Access-Control-Allow-Origin value");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << tool_version() << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* sub = nullptr;
    for (const auto* s : app.get_subcommands()) sub = s;
    err << (sub ? sub->help() : app.help());
    return kUsage;
  }

  try {
    if (validate->parsed()) return cmd_validate(c, out, err);
    if (orc->parsed()) return cmd_oracle(oracle_seed, out);
    if (synth->parsed()) {
      spec.mode = parse_synth_mode(synth_mode);
      return cmd_synth(c, spec, out, err);
    }
    if (report->parsed()) return cmd_report(c, out, err);
    if (serve->parsed()) return cmd_serve(c, serve_opts, out, err);

    const auto cfg = read_config(c);
    const auto corpus = load_corpus(c, true);
    const auto& emb = *corpus.embeddings;
    if (bottomup->parsed()) {
      const auto seg = segmentation.empty() ? cfg.activation_segmentation : parse_segmentation(segmentation);
      const auto stem = std::string("bottomup_") + std::string(to_string(seg));
      return run_analysis<NeuronBottomUpResult>(
          c, stem, std::string(to_string(seg)), "", corpus, cfg,
          [&](std::span<const NeuronRecord> ns) { return run_bottomup(ns, emb, seg, cfg, c.jobs); },
          [](std::span<const NeuronBottomUpResult> rs) {
            const auto agg = aggregate_bottomup(rs);
            return std::pair{bottomup_csv(agg), agg.n_neuron};
          },
          [](std::span<const NeuronBottomUpResult> rs, std::string_view d) { return bottomup_jsonl(rs, d); }, out, err);
    }

    const auto b = backend.empty() ? cfg.clustering_backend : parse_clustering_backend(backend);
    std::unique_ptr<ClusterBackend> prompt;
    std::unique_ptr<PartitionSource> source;
    std::string template_id;
    if (b == ClusteringBackend::prompt) {
      prompt = make_prompt_backend(cfg, emb, err);
      source = std::make_unique<PromptPartitionSource>(*prompt, cfg.prompt_template);
      template_id = cfg.prompt_template;
    } else {
      source = std::make_unique<EmbeddingPartitionSource>(emb);
    }
    const std::string backend_name(b == ClusteringBackend::prompt ? "prompt" : "embedding");

    if (topdown->parsed()) {
      return run_analysis<NeuronTopDownResult>(
          c, "topdown_" + backend_name, source->id(), template_id, corpus, cfg,
          [&](std::span<const NeuronRecord> ns) { return run_topdown(ns, *source, cfg, c.jobs); },
          [&](std::span<const NeuronTopDownResult> rs) {
            const auto agg = aggregate_topdown(rs, cfg.alpha);
            return std::pair{topdown_csv(agg), agg.n_neuron};
          },
          [](std::span<const NeuronTopDownResult> rs, std::string_view d) { return topdown_jsonl(rs, d); }, out, err);
    }
    return run_analysis<NeuronInterleavingResult>(
        c, "interleaving_" + backend_name, source->id(), template_id, corpus, cfg,
        [&](std::span<const NeuronRecord> ns) { return run_interleaving(ns, *source, cfg, c.jobs); },
        [](std::span<const NeuronInterleavingResult> rs) {
          const auto agg = aggregate_interleaving(rs);
          return std::pair{interleaving_csv(agg), agg.n_neuron};
        },
        [](std::span<const NeuronInterleavingResult> rs, std::string_view d) { return interleaving_jsonl(rs, d); }, out,
        err);
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << '\n';
    return kValidation;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  }
}

}  // namespace neurocat
