#pragma once

#include <array>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "dfn/corpus.hpp"

namespace dfn {

// Token and character index maps. Character index 0 is reserved for unknown
// characters; token lookups return -1 for out-of-vocabulary words.
struct Vocabulary {
  std::vector<std::string> tokens;
  std::unordered_map<std::string, int> token_index;
  std::vector<std::string> chars;  // chars[0] = "" (unknown)

  int token(const std::string& t) const {
    auto it = token_index.find(t);
    return it == token_index.end() ? -1 : it->second;
  }
  int chr(unsigned char c) const { return char_index_[c]; }

  void rebuild_maps() {
    token_index.clear();
    for (size_t i = 0; i < tokens.size(); ++i) token_index[tokens[i]] = int(i);
    char_index_.fill(0);
    for (size_t i = 1; i < chars.size(); ++i)
      if (chars[i].size() == 1)
        char_index_[(unsigned char)chars[i][0]] = int(i);
  }

  static Vocabulary build(const std::vector<Sample>& samples) {
    std::set<std::string> toks;
    std::set<char> cs;
    auto take = [&](const std::vector<std::string>& seq) {
      for (const auto& t : seq) {
        toks.insert(t);
        for (char c : t) cs.insert(c);
      }
    };
    for (const auto& s : samples) {
      take(s.passage);
      take(s.question);
      for (const auto& c : s.candidates) take(c);
    }
    Vocabulary v;
    v.tokens.assign(toks.begin(), toks.end());
    v.chars.push_back("");
    for (char c : cs) v.chars.push_back(std::string(1, c));
    v.rebuild_maps();
    return v;
  }

 private:
  std::array<int, 256> char_index_{};
};

}  // namespace dfn
