// include/dynavq/label.hpp
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

#ifndef DYNAVQ_LABEL_HPP_
#define DYNAVQ_LABEL_HPP_

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dynavq {

enum class LabelSource : std::uint8_t { kGroundTruth = 0, kPseudo = 1 };

// Phonemes are small integer ids in [0, alphabet size). Ids 0..25 print as
// letters a..z; larger alphabets fall back to p<i>.
struct LabelSequence {
  std::vector<int> phonemes;
  LabelSource source = LabelSource::kGroundTruth;

  std::size_t size() const { return phonemes.size(); }
  bool empty() const { return phonemes.empty(); }
};

inline std::string phoneme_name(int id) {
  if (id < 0) return "?";
  if (id < 26) return std::string(1, static_cast<char>('a' + id));
  return "p" + std::to_string(id);
}

inline std::string label_to_string(const LabelSequence& l) {
  std::string out;
  for (std::size_t i = 0; i < l.phonemes.size(); ++i) {
    if (i) out += ' ';
    out += phoneme_name(l.phonemes[i]);
  }
  return out;
}

inline int phoneme_from_name(const std::string& tok) {
  if (tok.size() == 1 && tok[0] >= 'a' && tok[0] <= 'z') return tok[0] - 'a';
  if (tok.size() > 1 && tok[0] == 'p') return std::stoi(tok.substr(1));
  throw std::runtime_error("unknown phoneme token: " + tok);
}

inline LabelSequence label_from_string(const std::string& s, LabelSource src) {
  LabelSequence l;
  l.source = src;
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) l.phonemes.push_back(phoneme_from_name(tok));
  return l;
}

}  // namespace dynavq

#endif  // DYNAVQ_LABEL_HPP_
