// Copyright 2026 The Mirrorloop Authors
// SPDX-License-Identifier: Apache-2.0
//
// Runs every (model, task, condition) sequence of an experiment on a
// bounded worker pool. Sequences are independent; results are handed to
// the sink in job order regardless of completion order.

#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mirrorloop/config.hpp"
#include "mirrorloop/protocol.hpp"

namespace mirrorloop {

struct SequenceJob {
  std::size_t ordinal = 0;
  std::size_t model_index = 0;
  TaskSpec task;
  Condition condition = Condition::kUngrounded;
};

// Job order: model, then task, then condition. Each task runs under every
// configured condition so the conditions are paired by task.
inline std::vector<SequenceJob> plan_jobs(const RunConfig& cfg,
                                          const std::vector<TaskSpec>& tasks) {
  std::vector<SequenceJob> jobs;
  for (std::size_t m = 0; m < cfg.models.size(); ++m) {
    for (const auto& t : tasks) {
      for (auto c : cfg.conditions) {
        jobs.push_back({jobs.size(), m, t, c});
      }
    }
  }
  return jobs;
}

inline std::vector<TaskSpec> experiment_tasks(const RunConfig& cfg) {
  return build_task_bank(cfg.seed, static_cast<std::size_t>(cfg.tasks_per_family()));
}

// Providers are shared across workers and must be thread-safe. Embedders
// are created once per worker.
using ProviderFactory = std::function<std::shared_ptr<ChatProvider>(const ProviderId&)>;
using EmbedderFactory = std::function<std::unique_ptr<Embedder>()>;
using SequenceSink = std::function<void(const SequenceRecord&)>;

struct RunSummary {
  std::size_t planned = 0;
  std::size_t completed = 0;
  std::size_t failed = 0;
  std::vector<std::string> failures;
};

inline RunSummary run_experiment(const RunConfig& cfg,
                                 const std::vector<TaskSpec>& tasks,
                                 const ProviderFactory& make_provider,
                                 const EmbedderFactory& make_embedder,
                                 const SequenceSink& sink,
                                 std::size_t parallelism = 1) {
  cfg.validate();
  if (parallelism == 0) throw ConfigError("parallelism must be >= 1");
  const std::string fingerprint = config_fingerprint(cfg);
  const auto jobs = plan_jobs(cfg, tasks);

  std::vector<std::shared_ptr<ChatProvider>> providers;
  for (const auto& m : cfg.models) providers.push_back(make_provider(m));
  const TimestampFn stamp = make_timestamp_fn(cfg);

  RunSummary summary;
  summary.planned = jobs.size();

  std::mutex mu;
  std::map<std::size_t, SequenceRecord> pending;
  std::size_t next_commit = 0;
  std::atomic<std::size_t> next_job{0};
  std::exception_ptr first_error;

  // Commits every finished record that is next in job order. Caller holds mu.
  auto drain = [&] {
    for (auto it = pending.find(next_commit); it != pending.end();
         it = pending.find(next_commit)) {
      const SequenceRecord& rec = it->second;
      if (rec.complete) {
        ++summary.completed;
      } else {
        ++summary.failed;
        summary.failures.push_back(rec.sequence_id + ": " + rec.failure);
      }
      if (!first_error && sink) {
        try {
          sink(rec);
        } catch (...) {
          first_error = std::current_exception();
        }
      }
      pending.erase(it);
      ++next_commit;
    }
  };

  auto work = [&] {
    std::unique_ptr<Embedder> embedder = make_embedder();
    for (;;) {
      const std::size_t i = next_job.fetch_add(1);
      if (i >= jobs.size()) break;
      {
        std::lock_guard lock(mu);
        if (first_error) break;
      }
      const SequenceJob& job = jobs[i];
      SequenceRecord rec = run_sequence(job.task, job.condition,
                                        *providers[job.model_index], *embedder,
                                        cfg, fingerprint, stamp);
      std::lock_guard lock(mu);
      pending.emplace(i, std::move(rec));
      drain();
    }
  };
  auto worker = [&] {
    try {
      work();
    } catch (...) {
      std::lock_guard lock(mu);
      if (!first_error) first_error = std::current_exception();
    }
  };

  const std::size_t n = std::min(parallelism, std::max<std::size_t>(jobs.size(), 1));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(n);
    for (std::size_t t = 0; t < n; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return summary;
}

}  // namespace mirrorloop
