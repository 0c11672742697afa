// Copyright 2026 The Mirrorloop Authors
// SPDX-License-Identifier: Apache-2.0
//
// JSONL transcripts. The first line is a header carrying the schema
// version and the full run configuration. Every iteration is one line;
// the index-0 line also carries the task. A sequence that failed is closed
// by a failure line.

#pragma once

#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mirrorloop/config.hpp"
#include "mirrorloop/protocol.hpp"

namespace mirrorloop {

inline constexpr std::string_view kTranscriptSchema = "mirrorloop.transcript";
inline constexpr int kTranscriptVersion = 1;

inline nlohmann::json transcript_header(const RunConfig& cfg) {
  return {{"schema", kTranscriptSchema},
          {"version", kTranscriptVersion},
          {"config_fingerprint", config_fingerprint(cfg)},
          {"config", run_config_to_json(cfg)}};
}

inline nlohmann::json metrics_to_json(const MetricVector& m) {
  return {{"delta_i", m.delta_i},
          {"ngram_novelty", m.ngram_novelty},
          {"embed_drift", m.embed_drift},
          {"char_entropy", m.char_entropy},
          {"length_chars", m.length_chars}};
}

inline MetricVector metrics_from_json(const nlohmann::json& j) {
  MetricVector m;
  m.delta_i = j.at("delta_i").get<double>();
  m.ngram_novelty = j.at("ngram_novelty").get<double>();
  m.embed_drift = j.at("embed_drift").get<double>();
  m.char_entropy = j.at("char_entropy").get<double>();
  m.length_chars = j.at("length_chars").get<std::size_t>();
  return m;
}

inline nlohmann::json iteration_to_json(const SequenceRecord& seq,
                                        const IterationRecord& it) {
  nlohmann::json j;
  j["type"] = "iteration";
  j["sequence_id"] = seq.sequence_id;
  j["task_id"] = seq.task.task_id;
  j["family"] = to_string(seq.task.family);
  j["model"] = seq.model.to_string();
  j["condition"] = to_string(seq.condition);
  j["config_fingerprint"] = seq.config_fingerprint;
  j["index"] = it.index;
  j["prompt"] = it.prompt_used;
  j["output"] = it.text.content();
  j["metrics"] = it.metrics ? metrics_to_json(*it.metrics) : nlohmann::json(nullptr);
  j["grounded"] = it.grounded;
  std::vector<std::string> flags;
  for (auto f : it.compliance_flags) flags.push_back(to_string(f));
  j["compliance_flags"] = flags;
  j["correctness"] = to_string(it.correctness);
  j["note"] = it.note;
  j["looping"] = it.looping;
  j["forked"] = it.forked;
  j["timestamp"] = it.timestamp;
  j["status"] = seq.complete ? "complete" : "incomplete";
  if (it.index == 0) j["task"] = task_to_json(seq.task);
  return j;
}

inline void persist_sequence(std::ostream& out, const SequenceRecord& seq) {
  for (const auto& it : seq.iterations) {
    out << iteration_to_json(seq, it).dump() << '\n';
  }
  if (!seq.complete) {
    nlohmann::json f;
    f["type"] = "failure";
    f["sequence_id"] = seq.sequence_id;
    f["task"] = task_to_json(seq.task);
    f["model"] = seq.model.to_string();
    f["condition"] = to_string(seq.condition);
    f["config_fingerprint"] = seq.config_fingerprint;
    f["failure"] = seq.failure;
    f["iterations_recorded"] = seq.iterations.size();
    out << f.dump() << '\n';
  }
}

// Writes the header on construction and each sequence as it is committed.
class TranscriptWriter {
 public:
  TranscriptWriter(const std::string& path, const RunConfig& cfg)
      : out_(path, std::ios::out | std::ios::trunc) {
    if (!out_) throw Error("cannot open transcript " + path + " for writing");
    out_ << transcript_header(cfg).dump() << '\n';
    out_.flush();
  }

  void write(const SequenceRecord& seq) {
    persist_sequence(out_, seq);
    out_.flush();
    if (!out_) throw Error("transcript write failed");
  }

 private:
  std::ofstream out_;
};

struct Transcript {
  RunConfig config;
  std::string config_fingerprint;
  std::vector<SequenceRecord> sequences;

  std::size_t record_count() const {
    std::size_t n = 0;
    for (const auto& s : sequences) n += s.iterations.size();
    return n;
  }
};

namespace detail {

inline IterationRecord iteration_from_json(const nlohmann::json& j) {
  IterationRecord it;
  it.index = j.at("index").get<int>();
  it.prompt_used = j.at("prompt").get<std::string>();
  it.text = IterationText(j.at("output").get<std::string>());
  if (!j.at("metrics").is_null()) it.metrics = metrics_from_json(j.at("metrics"));
  it.grounded = j.at("grounded").get<bool>();
  for (const auto& f : j.at("compliance_flags")) {
    it.compliance_flags.push_back(parse_compliance_flag(f.get<std::string>()));
  }
  it.correctness = parse_correctness(j.at("correctness").get<std::string>());
  it.note = j.at("note").get<std::string>();
  it.looping = j.at("looping").get<bool>();
  it.forked = j.at("forked").get<bool>();
  it.timestamp = j.at("timestamp").get<std::string>();
  return it;
}

}  // namespace detail

// Reads a transcript. Any malformed, out-of-order or truncated content is a
// ParseError naming the offending 1-based line.
inline Transcript load_sequences(std::istream& in) {
  Transcript t;
  std::string line;
  std::size_t line_no = 0;

  auto fail = [&](std::size_t at, const std::string& what) -> ParseError {
    return ParseError(at, what);
  };

  if (!std::getline(in, line)) throw fail(1, "empty transcript");
  ++line_no;
  try {
    const auto h = nlohmann::json::parse(line);
    if (h.at("schema").get<std::string>() != kTranscriptSchema) {
      throw fail(line_no, "not a mirrorloop transcript");
    }
    if (h.at("version").get<int>() != kTranscriptVersion) {
      throw fail(line_no, "unsupported transcript version " +
                              std::to_string(h.at("version").get<int>()));
    }
    t.config = run_config_from_json(h.at("config"));
    t.config_fingerprint = h.at("config_fingerprint").get<std::string>();
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw fail(line_no, std::string("bad header: ") + e.what());
  }

  const auto expected = static_cast<std::size_t>(t.config.iterations) + 1;
  SequenceRecord* open = nullptr;
  std::size_t open_last_line = 0;
  bool open_complete = false;

  auto close_open = [&] {
    if (open != nullptr && open_complete && open->iterations.size() != expected) {
      throw fail(open_last_line,
                 "truncated sequence " + open->sequence_id + ": " +
                     std::to_string(open->iterations.size()) + " of " +
                     std::to_string(expected) + " iterations");
    }
    open = nullptr;
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw fail(line_no, std::string("malformed JSON: ") + e.what());
    }
    try {
      const std::string type = j.at("type").get<std::string>();
      const std::string id = j.at("sequence_id").get<std::string>();
      if (type == "failure") {
        if (open == nullptr || open->sequence_id != id) {
          close_open();
          SequenceRecord s;
          s.sequence_id = id;
          s.task = task_from_json(j.at("task"));
          s.model = ProviderId::parse(j.at("model").get<std::string>());
          s.condition = parse_condition(j.at("condition").get<std::string>());
          s.config_fingerprint = j.at("config_fingerprint").get<std::string>();
          t.sequences.push_back(std::move(s));
          open = &t.sequences.back();
        } else if (open_complete) {
          throw fail(line_no, "failure line for a complete sequence");
        }
        open->complete = false;
        open->failure = j.at("failure").get<std::string>();
        close_open();
        continue;
      }
      if (type != "iteration") throw fail(line_no, "unknown line type '" + type + "'");
      IterationRecord it = detail::iteration_from_json(j);
      if (it.index == 0) {
        close_open();
        SequenceRecord s;
        s.sequence_id = id;
        s.task = task_from_json(j.at("task"));
        s.model = ProviderId::parse(j.at("model").get<std::string>());
        s.condition = parse_condition(j.at("condition").get<std::string>());
        s.config_fingerprint = j.at("config_fingerprint").get<std::string>();
        s.complete = j.at("status").get<std::string>() == "complete";
        t.sequences.push_back(std::move(s));
        open = &t.sequences.back();
        open_complete = open->complete;
      } else if (open == nullptr || open->sequence_id != id) {
        throw fail(line_no, "iteration " + std::to_string(it.index) +
                                " of " + id + " without its index-0 line");
      } else if (static_cast<std::size_t>(it.index) != open->iterations.size()) {
        throw fail(line_no, "expected index " +
                                std::to_string(open->iterations.size()) +
                                ", found " + std::to_string(it.index));
      }
      if (static_cast<std::size_t>(it.index) >= expected) {
        throw fail(line_no, "index beyond configured iterations");
      }
      open->iterations.push_back(std::move(it));
      open_last_line = line_no;
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw fail(line_no, std::string("bad record: ") + e.what());
    }
  }
  close_open();
  return t;
}

inline Transcript load_sequences(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open transcript " + path);
  return load_sequences(in);
}

struct MetricMismatch {
  std::string sequence_id;
  int index = 0;
  std::string field;
  double stored = 0.0;
  double recomputed = 0.0;
};

struct VerificationReport {
  std::size_t iterations_checked = 0;
  bool drift_checked = false;
  std::vector<MetricMismatch> mismatches;
};

// Recomputes every stored metric from the stored texts. Drift is only
// recomputable with the hashing embedder; remote drift is skipped.
inline VerificationReport verify_metrics(const Transcript& t) {
  VerificationReport rep;
  rep.drift_checked = t.config.embedder.kind == EmbedderKind::kHashing;
  for (const auto& seq : t.sequences) {
    NgramHistory history;
    std::optional<EmbeddingVector> prev_emb;
    for (std::size_t i = 0; i < seq.iterations.size(); ++i) {
      const auto& it = seq.iterations[i];
      std::optional<EmbeddingVector> emb;
      if (rep.drift_checked) emb = hashing_embed(t.config.embedder, it.text);
      if (i == 0) {
        if (it.metrics) {
          rep.mismatches.push_back({seq.sequence_id, 0, "metrics", 0, 0});
        }
      } else if (!it.metrics) {
        rep.mismatches.push_back({seq.sequence_id, it.index, "metrics", 0, 0});
      } else {
        const auto& prev = seq.iterations[i - 1];
        MetricVector m;
        m.delta_i = normalized_edit_distance(it.text, prev.text);
        m.ngram_novelty = ngram_novelty(it.text, history.grams());
        m.char_entropy = char_entropy(it.text);
        m.length_chars = it.text.char_length();
        const MetricVector& s = *it.metrics;
        auto check = [&](const char* field, double stored, double recomputed) {
          if (stored != recomputed) {
            rep.mismatches.push_back(
                {seq.sequence_id, it.index, field, stored, recomputed});
          }
        };
        check("delta_i", s.delta_i, m.delta_i);
        check("ngram_novelty", s.ngram_novelty, m.ngram_novelty);
        check("char_entropy", s.char_entropy, m.char_entropy);
        check("length_chars", static_cast<double>(s.length_chars),
              static_cast<double>(m.length_chars));
        if (rep.drift_checked) {
          check("embed_drift", s.embed_drift, embedding_drift(*emb, *prev_emb));
        }
        ++rep.iterations_checked;
      }
      history.add(it.text);
      prev_emb = std::move(emb);
    }
  }
  return rep;
}

}  // namespace mirrorloop
