// include/dynavq/corpus_io.hpp
//
// Copyright 2026 The dynavq Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DYNAVQ_CORPUS_IO_HPP_
#define DYNAVQ_CORPUS_IO_HPP_

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "dynavq/corpus.hpp"
#include "dynavq/serialize.hpp"

namespace dynavq {

// Corpus on disk: line-delimited JSON.
//
//   corpus.jsonl   header record, then one record per utterance:
//     {"format":"dynavq-corpus","version":1,"frame_encoding":"b64"|"text",
//      "spec":{...}}
//     {"id":"p0","split":"paired","n_frames":17,"frames":"<base64 of
//      row-major little-endian f64>","label":"a b c"}
//     text-encoded files carry "frames":[[...],...] instead.
//
//   truth.jsonl    evaluation-only sidecar, one record per unpaired/eval
//     utterance: {"id":"u0","label":"d e","durations":[3,4]}

inline nlohmann::json corpus_spec_to_json(const CorpusSpec& s) {
  return {{"alphabet_size", s.alphabet_size},
          {"feat_dim", s.feat_dim},
          {"paired_phonemes", s.paired_phonemes},
          {"unpaired_phonemes", s.unpaired_phonemes},
          {"paired_frames", s.paired_frames},
          {"unpaired_frames", s.unpaired_frames},
          {"eval_utterances", s.eval_utterances},
          {"dur_min", s.dur_min},
          {"dur_max", s.dur_max},
          {"utt_phonemes_min", s.utt_phonemes_min},
          {"utt_phonemes_max", s.utt_phonemes_max},
          {"noise", s.noise},
          {"margin", s.margin},
          {"seed", s.seed}};
}

inline CorpusSpec corpus_spec_from_json(const nlohmann::json& j) {
  CorpusSpec s;
  s.alphabet_size = j.at("alphabet_size");
  s.feat_dim = j.at("feat_dim");
  s.paired_phonemes = j.at("paired_phonemes");
  s.unpaired_phonemes = j.at("unpaired_phonemes");
  s.paired_frames = j.at("paired_frames");
  s.unpaired_frames = j.at("unpaired_frames");
  s.eval_utterances = j.at("eval_utterances");
  s.dur_min = j.at("dur_min");
  s.dur_max = j.at("dur_max");
  s.utt_phonemes_min = j.at("utt_phonemes_min");
  s.utt_phonemes_max = j.at("utt_phonemes_max");
  s.noise = j.at("noise");
  s.margin = j.at("margin");
  s.seed = j.at("seed");
  return s;
}

namespace corpus_io_detail {

inline std::string encode_frames(const std::vector<std::vector<double>>& frames) {
  std::string raw;
  for (const auto& f : frames)
    for (double v : f) put_f64_le(raw, v);
  return base64_encode(raw);
}

inline std::vector<std::vector<double>> decode_frames(const std::string& b64,
                                                      std::size_t n, std::size_t f) {
  std::string raw = base64_decode(b64);
  if (raw.size() != n * f * 8)
    throw std::runtime_error("corpus: frame block size mismatch");
  ByteReader r(raw);
  std::vector<std::vector<double>> frames(n, std::vector<double>(f));
  for (auto& row : frames)
    for (double& v : row) v = r.f64_le();
  return frames;
}

inline nlohmann::json utterance_record(const Utterance& u, const char* split,
                                       bool text_encoding) {
  nlohmann::json rec;
  rec["id"] = u.id;
  rec["split"] = split;
  rec["n_frames"] = u.num_frames();
  if (text_encoding) {
    rec["frames"] = u.frames;
  } else {
    rec["frames"] = encode_frames(u.frames);
  }
  if (u.label) rec["label"] = label_to_string(*u.label);
  return rec;
}

}  // namespace corpus_io_detail

inline void write_corpus(const Corpus& corpus, const std::string& dir,
                         bool text_encoding = false) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ofstream out(fs::path(dir) / "corpus.jsonl", std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write corpus.jsonl in " + dir);
    nlohmann::json header = {{"format", "dynavq-corpus"},
                             {"version", 1},
                             {"frame_encoding", text_encoding ? "text" : "b64"},
                             {"spec", corpus_spec_to_json(corpus.spec)}};
    out << header.dump() << "\n";
    using corpus_io_detail::utterance_record;
    for (const auto& u : corpus.paired)
      out << utterance_record(u, "paired", text_encoding).dump() << "\n";
    for (const auto& u : corpus.unpaired)
      out << utterance_record(u, "unpaired", text_encoding).dump() << "\n";
    for (const auto& u : corpus.eval_set)
      out << utterance_record(u, "eval", text_encoding).dump() << "\n";
  }
  {
    std::ofstream out(fs::path(dir) / "truth.jsonl", std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write truth.jsonl in " + dir);
    for (const auto& [id, rec] : corpus.truth) {
      nlohmann::json j = {{"id", id},
                          {"label", label_to_string(rec.label)},
                          {"durations", rec.durations}};
      out << j.dump() << "\n";
    }
  }
}

inline Corpus read_corpus(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream in(fs::path(dir) / "corpus.jsonl");
  if (!in) throw std::runtime_error("cannot open corpus.jsonl in " + dir);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("corpus.jsonl is empty");
  nlohmann::json header = nlohmann::json::parse(line);
  if (header.at("format") != "dynavq-corpus" || header.at("version") != 1)
    throw std::runtime_error("corpus.jsonl: unsupported format/version");
  bool text_encoding = header.at("frame_encoding") == "text";

  Corpus corpus;
  corpus.spec = corpus_spec_from_json(header.at("spec"));
  corpus.alphabet =
      PhonemeAlphabet::make(corpus.spec.alphabet_size, corpus.spec.feat_dim,
                            corpus.spec.margin, derive_seed(corpus.spec.seed, "alphabet"));

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json rec = nlohmann::json::parse(line);
    Utterance u;
    u.id = rec.at("id");
    std::size_t n = rec.at("n_frames");
    if (text_encoding) {
      u.frames = rec.at("frames").get<std::vector<std::vector<double>>>();
      if (u.frames.size() != n)
        throw std::runtime_error("corpus: frame count mismatch for " + u.id);
    } else {
      u.frames = corpus_io_detail::decode_frames(rec.at("frames"), n,
                                                 corpus.spec.feat_dim);
    }
    if (rec.contains("label"))
      u.label = label_from_string(rec.at("label"), LabelSource::kGroundTruth);
    std::string split = rec.at("split");
    if (split == "paired")
      corpus.paired.push_back(std::move(u));
    else if (split == "unpaired")
      corpus.unpaired.push_back(std::move(u));
    else if (split == "eval")
      corpus.eval_set.push_back(std::move(u));
    else
      throw std::runtime_error("corpus: unknown split " + split);
  }

  std::ifstream tin(fs::path(dir) / "truth.jsonl");
  if (tin) {
    while (std::getline(tin, line)) {
      if (line.empty()) continue;
      nlohmann::json rec = nlohmann::json::parse(line);
      TruthRecord t;
      t.label = label_from_string(rec.at("label"), LabelSource::kGroundTruth);
      t.durations = rec.at("durations").get<std::vector<std::size_t>>();
      corpus.truth[rec.at("id")] = std::move(t);
    }
  }
  return corpus;
}

}  // namespace dynavq

#endif  // DYNAVQ_CORPUS_IO_HPP_
