#include "neurocat/corpus_runner.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <optional>
#include <set>
#include <thread>

#include "neurocat/errors.hpp"

namespace neurocat {

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, n);
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> workers;
    workers.reserve(jobs);
    for (std::size_t w = 0; w < jobs; ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
            next = n;
          }
        }
      });
    }
  }
  if (first_error) std::rethrow_exception(first_error);
}

namespace {

template <class Result, class Fn>
CorpusOutcome<Result> run_each(std::span<const NeuronRecord> neurons, std::size_t jobs, Fn&& analyze) {
  std::vector<std::optional<Result>> slots(neurons.size());
  std::vector<std::optional<std::string>> errors(neurons.size());
  parallel_for(neurons.size(), jobs, [&](std::size_t i) {
    try {
      slots[i] = analyze(neurons[i]);
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  });
  CorpusOutcome<Result> out;
  for (std::size_t i = 0; i < neurons.size(); ++i) {
    if (slots[i])
      out.results.push_back(std::move(*slots[i]));
    else
      out.failures.push_back({neurons[i].id, errors[i].value_or("unknown error")});
  }
  return out;
}

}  // namespace

CorpusOutcome<NeuronTopDownResult> run_topdown(std::span<const NeuronRecord> neurons, const PartitionSource& source,
                                               const RunConfig& config, std::size_t jobs) {
  return run_each<NeuronTopDownResult>(
      neurons, jobs, [&](const NeuronRecord& n) { return analyze_neuron_topdown(n, source, config); });
}

CorpusOutcome<NeuronInterleavingResult> run_interleaving(std::span<const NeuronRecord> neurons,
                                                         const PartitionSource& source, const RunConfig& config,
                                                         std::size_t jobs) {
  return run_each<NeuronInterleavingResult>(
      neurons, jobs, [&](const NeuronRecord& n) { return analyze_neuron_interleaving(n, source, config); });
}

CorpusOutcome<NeuronBottomUpResult> run_bottomup(std::span<const NeuronRecord> neurons, const EmbeddingTable& emb,
                                                 ActivationSegmentation segmentation, const RunConfig& config,
                                                 std::size_t jobs) {
  return run_each<NeuronBottomUpResult>(
      neurons, jobs, [&](const NeuronRecord& n) { return analyze_neuron_bottomup(n, emb, segmentation, config); });
}

std::vector<NeuronRecord> filter_layers(std::span<const NeuronRecord> neurons, std::span<const int> layers) {
  std::vector<NeuronRecord> out;
  for (const auto& n : neurons) {
    if (layers.empty() || std::find(layers.begin(), layers.end(), n.id.layer) != layers.end()) out.push_back(n);
  }
  return out;
}

std::vector<int> layers_of(std::span<const NeuronRecord> neurons) {
  std::set<int> s;
  for (const auto& n : neurons) s.insert(n.id.layer);
  return {s.begin(), s.end()};
}

}  // namespace neurocat
