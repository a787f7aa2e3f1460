#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dfn/common.hpp"

namespace dfn {

// One passage + question + r candidates + gold index.
struct Sample {
  std::string id;
  std::string family;  // synthetic family tag, empty for RACE data
  std::vector<std::string> passage;
  std::vector<std::string> question;
  std::vector<std::vector<std::string>> candidates;
  int gold = 0;

  int r() const { return int(candidates.size()); }
  void check() const;  // throws DataError on invariant violation
};

// Lowercase, whitespace/punctuation-splitting tokenizer; "_" is kept as its
// own token. Empty text yields an empty sequence.
std::vector<std::string> tokenize(const std::string& text);
std::string join_tokens(const std::vector<std::string>& toks);

void truncate_sample(Sample& s, int max_passage, int max_question,
                     int max_answer);

// ---- RACE ------------------------------------------------------------------

struct RaceStats {
  size_t passages = 0;
  size_t questions = 0;
  size_t bad_files = 0;
};

// Loads every RACE-format file under dir (recursively). Malformed records
// raise DataError unless skip_bad is set, in which case they are counted and
// warned via the `warn` callback.
std::vector<Sample> load_race(const std::string& dir, int max_passage,
                              int max_question, int max_answer, bool skip_bad,
                              RaceStats* stats = nullptr,
                              const std::function<void(const std::string&)>& warn = {});

// ---- synthetic corpus -------------------------------------------------

struct SynthSpec {
  std::string family;  // cloze | longneg | entangle
  int vocab_size = 40;
  int n_samples = 100;
  uint64_t seed = 0;
  int min_sentences = 5;
  int max_sentences = 7;
};

// Deterministic generator. The content-word pool depends only on vocab_size,
// so corpora generated with different seeds share a vocabulary.
std::vector<Sample> gen_synthetic(const SynthSpec& spec);

// The strategy each family is built to favour.
int designed_strategy(const std::string& family);

// All words the generator can emit for a given pool size (content + template
// words). Used to emit a pretrained-vector file covering the corpus.
std::vector<std::string> synth_vocabulary(int vocab_size);

// ---- persistence -------------------------------------------------------

// Line-delimited records {id, family, passage, question, candidates, gold}.
void save_corpus_jsonl(const std::vector<Sample>& samples,
                       const std::string& path);
std::vector<Sample> load_corpus_jsonl(const std::string& path);

// ---- batching -----------------------------------------------------------

// Index batches for one epoch: seeded shuffle, final partial batch kept.
std::vector<std::vector<int>> epoch_batches(int n, int batch_size,
                                            uint64_t seed, int epoch);

}  // namespace dfn
