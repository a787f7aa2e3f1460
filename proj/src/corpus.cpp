#include "dfn/corpus.hpp"

#include "dfn/config.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace dfn {

void Sample::check() const {
  if (candidates.size() < 2) throw DataError(id + ": fewer than 2 candidates");
  if (gold < 0 || gold >= int(candidates.size()))
    throw DataError(id + ": gold index out of range");
  if (passage.empty()) throw DataError(id + ": empty passage");
  if (question.empty()) throw DataError(id + ": empty question");
  for (const auto& c : candidates)
    if (c.empty()) throw DataError(id + ": empty candidate");
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  };
  for (unsigned char ch : text) {
    if (std::isspace(ch)) {
      flush();
    } else if (std::isalnum(ch) || ch >= 0x80 || ch == '\'') {
      cur.push_back(char(std::tolower(ch)));
    } else {
      // punctuation (including '_') becomes its own token
      flush();
      out.push_back(std::string(1, char(ch)));
    }
  }
  flush();
  return out;
}

std::string join_tokens(const std::vector<std::string>& toks) {
  std::string s;
  for (size_t i = 0; i < toks.size(); ++i) {
    if (i) s += ' ';
    s += toks[i];
  }
  return s;
}

void truncate_sample(Sample& s, int max_passage, int max_question,
                     int max_answer) {
  if (int(s.passage.size()) > max_passage) s.passage.resize(max_passage);
  if (int(s.question.size()) > max_question) s.question.resize(max_question);
  for (auto& c : s.candidates)
    if (int(c.size()) > max_answer) c.resize(max_answer);
}

// ---- RACE -------------------------------------------------------------

namespace {

Sample race_question_to_sample(const std::string& file, const json& rec,
                               size_t qi, int max_p, int max_q, int max_a) {
  Sample s;
  s.id = rec.contains("id") && rec["id"].is_string()
             ? rec["id"].get<std::string>() + "-q" + std::to_string(qi)
             : file + "-q" + std::to_string(qi);
  s.passage = tokenize(rec["article"].get<std::string>());
  s.question = tokenize(rec["questions"][qi].get<std::string>());
  const json& opts = rec["options"][qi];
  if (!opts.is_array() || opts.size() != 4)
    throw DataError(file + ": options entry must have exactly 4 strings");
  for (const auto& o : opts) {
    if (!o.is_string()) throw DataError(file + ": option is not a string");
    s.candidates.push_back(tokenize(o.get<std::string>()));
  }
  std::string ans = rec["answers"][qi].get<std::string>();
  if (ans.size() != 1 || ans[0] < 'A' || ans[0] > 'D')
    throw DataError(file + ": answer letter must be A-D, got '" + ans + "'");
  s.gold = ans[0] - 'A';
  truncate_sample(s, max_p, max_q, max_a);
  s.check();
  return s;
}

void load_race_record(const std::string& file, const json& rec,
                      std::vector<Sample>& out, size_t* passages, int max_p,
                      int max_q, int max_a) {
  for (const char* f : {"article", "questions", "options", "answers"})
    if (!rec.contains(f))
      throw DataError(file + ": missing field '" + std::string(f) + "'");
  if (!rec["article"].is_string())
    throw DataError(file + ": 'article' must be a string");
  size_t nq = rec["questions"].size();
  if (rec["options"].size() != nq || rec["answers"].size() != nq)
    throw DataError(file + ": questions/options/answers sizes differ");
  *passages += 1;
  for (size_t qi = 0; qi < nq; ++qi)
    out.push_back(race_question_to_sample(file, rec, qi, max_p, max_q, max_a));
}

}  // namespace

std::vector<Sample> load_race(const std::string& dir, int max_passage,
                              int max_question, int max_answer, bool skip_bad,
                              RaceStats* stats,
                              const std::function<void(const std::string&)>& warn) {
  if (!fs::exists(dir)) throw DataError("no such data directory: " + dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());

  std::vector<Sample> out;
  RaceStats st;
  for (const auto& p : files) {
    try {
      std::ifstream f(p);
      json doc = json::parse(f);
      if (doc.is_array()) {
        for (const auto& rec : doc)
          load_race_record(p.string(), rec, out, &st.passages, max_passage,
                           max_question, max_answer);
      } else {
        load_race_record(p.string(), doc, out, &st.passages, max_passage,
                         max_question, max_answer);
      }
    } catch (const json::exception& e) {
      std::string msg = p.string() + ": not a RACE record (" + e.what() + ")";
      if (!skip_bad) throw DataError(msg);
      st.bad_files++;
      if (warn) warn(msg);
    } catch (const DataError& e) {
      if (!skip_bad) throw;
      st.bad_files++;
      if (warn) warn(e.what());
    }
  }
  st.questions = out.size();
  if (stats) *stats = st;
  return out;
}

// ---- synthetic corpus ----------------------------------------------------

namespace {

// Content pool is a function of vocab_size only, so train/test corpora share
// words. Split into three role groups (first / middle / last slot words).
std::vector<std::string> content_pool(int vocab_size) {
  SplitMix64 rng(0xc0ffee ^ (uint64_t(vocab_size) << 20));
  std::set<std::string> seen;
  std::vector<std::string> pool;
  while (int(pool.size()) < vocab_size) {
    int len = 3 + int(rng.next_below(3));
    std::string w;
    for (int i = 0; i < len; ++i)
      w.push_back(char('a' + rng.next_below(26)));
    if (seen.insert(w).second) pool.push_back(w);
  }
  return pool;
}

struct Roles {
  std::vector<std::string> a, b, c;
};

Roles split_roles(const std::vector<std::string>& pool) {
  Roles r;
  size_t third = pool.size() / 3;
  r.a.assign(pool.begin(), pool.begin() + third);
  r.b.assign(pool.begin() + third, pool.begin() + 2 * third);
  r.c.assign(pool.begin() + 2 * third, pool.end());
  return r;
}

// k distinct picks from words
std::vector<std::string> pick_distinct(const std::vector<std::string>& words,
                                       size_t k, SplitMix64& rng) {
  std::vector<int> idx(words.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = int(i);
  for (size_t i = 0; i < k; ++i) {
    size_t j = i + rng.next_below(idx.size() - i);
    std::swap(idx[i], idx[j]);
  }
  std::vector<std::string> out;
  for (size_t i = 0; i < k; ++i) out.push_back(words[idx[i]]);
  return out;
}

template <class T>
void shuffle_vec(std::vector<T>& v, SplitMix64& rng) {
  for (size_t i = v.size(); i > 1; --i)
    std::swap(v[i - 1], v[rng.next_below(i)]);
}

void append(std::vector<std::string>& dst, const std::vector<std::string>& src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

// Places gold at a seeded position among the distractors.
void place_candidates(Sample& s, const std::vector<std::string>& gold,
                      std::vector<std::vector<std::string>> distractors,
                      SplitMix64& rng) {
  int pos = int(rng.next_below(distractors.size() + 1));
  s.candidates.clear();
  for (int i = 0, d = 0; i < int(distractors.size()) + 1; ++i) {
    if (i == pos) s.candidates.push_back(gold);
    else s.candidates.push_back(std::move(distractors[d++]));
  }
  s.gold = pos;
}

// cloze: complete a passage sentence; every candidate ends some sentence.
Sample gen_cloze(const Roles& roles, SplitMix64& rng, int ns) {
  auto as = pick_distinct(roles.a, ns, rng);
  auto bs = pick_distinct(roles.b, ns, rng);
  auto cs = pick_distinct(roles.c, ns, rng);
  Sample s;
  s.family = "cloze";
  for (int i = 0; i < ns; ++i)
    append(s.passage, {as[i], bs[i], cs[i], "."});
  int k = int(rng.next_below(ns));
  s.question = {as[k], bs[k], "_"};
  std::vector<std::vector<std::string>> distract;
  for (int i = 0; i < ns && int(distract.size()) < 3; ++i)
    if (i != k) distract.push_back({cs[i]});
  place_candidates(s, {cs[k]}, std::move(distract), rng);
  return s;
}

// longneg: facts "x is y"; exactly one candidate contradicts the passage.
// The corrupted object is another fact's object, so every candidate word
// occurs in the passage.
Sample gen_longneg(const Roles& roles, SplitMix64& rng, int ns) {
  auto xs = pick_distinct(roles.a, ns, rng);
  auto ys = pick_distinct(roles.b, ns, rng);
  Sample s;
  s.family = "longneg";
  for (int i = 0; i < ns; ++i)
    append(s.passage, {xs[i], "is", ys[i], "."});
  int k = int(rng.next_below(ns));
  int other = int(rng.next_below(ns - 1));
  if (other >= k) ++other;
  std::vector<std::string> gold = {xs[k], "is", ys[other]};
  std::vector<std::vector<std::string>> distract;
  std::vector<int> facts;
  for (int i = 0; i < ns; ++i) facts.push_back(i);
  shuffle_vec(facts, rng);
  for (int i : facts)
    if (int(distract.size()) < 3) distract.push_back({xs[i], "is", ys[i]});
  if (rng.next_below(2) == 0)
    s.question = {"which", "of", "the", "following", "is", "not", "true", "?"};
  else
    s.question = {"all", "of", "the", "following", "are", "true", "except", "?"};
  place_candidates(s, gold, std::move(distract), rng);
  return s;
}

// entangle: two 2-hop containment chains; answering needs both sentences of
// the queried chain. Distractors are the 1-hop waypoint and the other chain.
Sample gen_entangle(const Roles& roles, SplitMix64& rng, int /*ns*/) {
  auto us = pick_distinct(roles.a, 2, rng);
  auto vs = pick_distinct(roles.b, 2, rng);
  auto ws = pick_distinct(roles.c, 2, rng);
  Sample s;
  s.family = "entangle";
  std::vector<std::vector<std::string>> sents;
  for (int i = 0; i < 2; ++i) {
    sents.push_back({us[i], "in", vs[i], "."});
    sents.push_back({vs[i], "in", ws[i], "."});
  }
  shuffle_vec(sents, rng);
  for (const auto& sent : sents) append(s.passage, sent);
  int q = int(rng.next_below(2));
  s.question = {"where", "is", us[q], "finally", "?"};
  place_candidates(s, {ws[q]}, {{vs[q]}, {ws[1 - q]}, {vs[1 - q]}}, rng);
  return s;
}

// Re-derive the answer from the passage alone; used as the generator's own
// consistency oracle.
int solve_from_passage(const Sample& s) {
  auto sentences = [&] {
    std::vector<std::vector<std::string>> out;
    std::vector<std::string> cur;
    for (const auto& t : s.passage) {
      if (t == ".") {
        if (!cur.empty()) out.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(t);
      }
    }
    return out;
  }();
  if (s.family == "cloze") {
    for (int j = 0; j < int(s.candidates.size()); ++j) {
      std::vector<std::string> full = {s.question[0], s.question[1]};
      append(full, s.candidates[j]);
      for (const auto& sent : sentences)
        if (sent == full) return j;
    }
    return -1;
  }
  if (s.family == "longneg") {
    for (int j = 0; j < int(s.candidates.size()); ++j) {
      bool found = false;
      for (const auto& sent : sentences)
        if (sent == s.candidates[j]) found = true;
      if (!found) return j;  // the contradicting one
    }
    return -1;
  }
  if (s.family == "entangle") {
    const std::string& u = s.question[2];
    std::string v, w;
    for (const auto& sent : sentences)
      if (sent.size() == 3 && sent[0] == u && sent[1] == "in") v = sent[2];
    for (const auto& sent : sentences)
      if (sent.size() == 3 && sent[0] == v && sent[1] == "in") w = sent[2];
    for (int j = 0; j < int(s.candidates.size()); ++j)
      if (s.candidates[j] == std::vector<std::string>{w}) return j;
    return -1;
  }
  return -1;
}

}  // namespace

int designed_strategy(const std::string& family) {
  if (family == "cloze") return kIntegral;
  if (family == "longneg") return kAnswerOnly;
  if (family == "entangle") return kEntangled;
  return -1;
}

std::vector<std::string> synth_vocabulary(int vocab_size) {
  std::vector<std::string> v = content_pool(vocab_size);
  for (const char* w :
       {"is", "in", "which", "of", "the", "following", "not", "true", "all",
        "are", "except", "where", "finally", ".", "?", "_"})
    v.push_back(w);
  return v;
}

std::vector<Sample> gen_synthetic(const SynthSpec& spec) {
  if (spec.vocab_size < 20) throw DataError("synth: vocab_size must be >= 20");
  if (spec.n_samples < 1) throw DataError("synth: n_samples must be >= 1");
  if (designed_strategy(spec.family) < 0)
    throw DataError("synth: unknown family '" + spec.family +
                    "' (cloze, longneg, entangle)");
  Roles roles = split_roles(content_pool(spec.vocab_size));
  int span = spec.max_sentences - spec.min_sentences + 1;
  std::vector<Sample> out;
  out.reserve(spec.n_samples);
  for (int i = 0; i < spec.n_samples; ++i) {
    SplitMix64 rng(SplitMix64::mix(spec.seed, uint64_t(i) + 1));
    int ns = spec.min_sentences + int(rng.next_below(uint64_t(span)));
    ns = std::min<int>(ns, int(std::min(roles.a.size(), std::min(roles.b.size(), roles.c.size()))));
    Sample s;
    if (spec.family == "cloze") s = gen_cloze(roles, rng, std::max(ns, 4));
    else if (spec.family == "longneg") s = gen_longneg(roles, rng, std::max(ns, 4));
    else s = gen_entangle(roles, rng, ns);
    s.id = spec.family + "-" + std::to_string(i);
    s.check();
    if (solve_from_passage(s) != s.gold)
      throw DataError(s.id + ": generator consistency check failed");
    out.push_back(std::move(s));
  }
  return out;
}

// ---- persistence ----------------------------------------------------------

void save_corpus_jsonl(const std::vector<Sample>& samples,
                       const std::string& path) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write corpus file: " + path);
  for (const auto& s : samples) {
    json j = {{"id", s.id},       {"family", s.family},
              {"passage", s.passage}, {"question", s.question},
              {"candidates", s.candidates}, {"gold", s.gold}};
    f << j.dump() << "\n";
  }
}

std::vector<Sample> load_corpus_jsonl(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open corpus file: " + path);
  std::vector<Sample> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      Sample s;
      s.id = j.at("id").get<std::string>();
      s.family = j.value("family", "");
      s.passage = j.at("passage").get<std::vector<std::string>>();
      s.question = j.at("question").get<std::vector<std::string>>();
      s.candidates = j.at("candidates").get<std::vector<std::vector<std::string>>>();
      s.gold = j.at("gold").get<int>();
      s.check();
      out.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": bad record (" +
                      e.what() + ")");
    }
  }
  return out;
}

// ---- batching -----------------------------------------------------------

std::vector<std::vector<int>> epoch_batches(int n, int batch_size,
                                            uint64_t seed, int epoch) {
  if (batch_size < 1) throw UsageError("batch_size must be >= 1");
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  SplitMix64 rng(SplitMix64::mix(seed, 0x9d2c5680u + uint64_t(epoch)));
  for (int i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.next_below(i)]);
  std::vector<std::vector<int>> batches;
  for (int off = 0; off < n; off += batch_size) {
    int end = std::min(n, off + batch_size);
    batches.emplace_back(idx.begin() + off, idx.begin() + end);
  }
  return batches;
}

}  // namespace dfn
