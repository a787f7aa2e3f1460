#include "dfn/config.hpp"

#include <fstream>
#include <sstream>
#include <vector>

namespace dfn {

const char* strategy_name(int g) {
  switch (g) {
    case kIntegral: return "integral";
    case kAnswerOnly: return "answer-only";
    case kEntangled: return "entangled";
  }
  return "?";
}

int strategy_from_name(const std::string& s) {
  if (s == "integral") return kIntegral;
  if (s == "answer-only" || s == "answer_only" || s == "aso") return kAnswerOnly;
  if (s == "entangled") return kEntangled;
  return -1;
}

namespace {

const std::vector<std::string>& valid_keys() {
  static const std::vector<std::string> keys = {
      "h", "char_h", "char_dim", "word_dim", "n_perspectives", "lambda",
      "t_max", "d_s", "n_strategies", "dropout", "lr", "batch", "max_passage",
      "max_question", "max_answer", "seed", "ablation", "fixed_strategy",
      "b_floor", "epochs", "advantage", "step0"};
  return keys;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

int to_int(const std::string& k, const std::string& v) {
  try {
    size_t pos;
    int x = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (...) {
    throw UsageError("config: bad integer for " + k + ": '" + v + "'");
  }
}

double to_double(const std::string& k, const std::string& v) {
  try {
    size_t pos;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (...) {
    throw UsageError("config: bad number for " + k + ": '" + v + "'");
  }
}

bool to_bool(const std::string& k, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw UsageError("config: bad bool for " + k + ": '" + v + "'");
}

}  // namespace

void TrainConfig::set(const std::string& key, const std::string& value) {
  if (key == "h") h = to_int(key, value);
  else if (key == "char_h") char_h = to_int(key, value);
  else if (key == "char_dim") char_dim = to_int(key, value);
  else if (key == "word_dim") word_dim = to_int(key, value);
  else if (key == "n_perspectives") n_perspectives = to_int(key, value);
  else if (key == "lambda") lambda = to_double(key, value);
  else if (key == "t_max") t_max = to_int(key, value);
  else if (key == "d_s") d_s = to_int(key, value);
  else if (key == "n_strategies") n_strategies = to_int(key, value);
  else if (key == "dropout") dropout = to_double(key, value);
  else if (key == "lr") lr = to_double(key, value);
  else if (key == "batch") batch = to_int(key, value);
  else if (key == "max_passage") max_passage = to_int(key, value);
  else if (key == "max_question") max_question = to_int(key, value);
  else if (key == "max_answer") max_answer = to_int(key, value);
  else if (key == "seed") seed = uint64_t(std::stoull(value));
  else if (key == "b_floor") b_floor = to_double(key, value);
  else if (key == "epochs") epochs = to_int(key, value);
  else if (key == "step0") step0 = to_bool(key, value);
  else if (key == "ablation") {
    if (value == "full") ablation = Ablation::Full;
    else if (value == "no-df") ablation = Ablation::NoDF;
    else if (value == "no-mr") ablation = Ablation::NoMR;
    else if (value == "no-df-mr") ablation = Ablation::NoDFMR;
    else throw UsageError("config: ablation must be one of full, no-df, no-mr, no-df-mr");
  } else if (key == "fixed_strategy") {
    if (value.empty() || value == "none") {
      fixed_strategy = -1;
    } else {
      fixed_strategy = strategy_from_name(value);
      if (fixed_strategy < 0)
        throw UsageError("config: fixed_strategy must be integral, answer-only or entangled");
    }
  } else if (key == "advantage") {
    if (value == "ratio") advantage = Advantage::Ratio;
    else if (value == "rb") advantage = Advantage::RB;
    else throw UsageError("config: advantage must be ratio or rb");
  } else {
    std::string msg = "config: unknown key '" + key + "'. Valid keys:";
    for (const auto& k : valid_keys()) msg += " " + k;
    throw UsageError(msg);
  }
}

void TrainConfig::validate() const {
  auto pos = [](const char* name, double v) {
    if (v <= 0) throw UsageError(std::string("config: ") + name + " must be positive");
  };
  pos("h", h);
  pos("char_h", char_h);
  pos("char_dim", char_dim);
  pos("word_dim", word_dim);
  pos("n_perspectives", n_perspectives);
  pos("t_max", t_max);
  pos("d_s", d_s);
  pos("lr", lr);
  pos("batch", batch);
  pos("max_passage", max_passage);
  pos("max_question", max_question);
  pos("max_answer", max_answer);
  pos("b_floor", b_floor);
  pos("epochs", epochs);
  if (dropout < 0 || dropout >= 1)
    throw UsageError("config: dropout must be in [0, 1)");
  if (lambda < 0) throw UsageError("config: lambda must be >= 0");
  if (n_strategies != kNumStrategies)
    throw UsageError("config: n_strategies must be 3 (registered strategies)");
  bool needs_fixed = ablation == Ablation::NoDF || ablation == Ablation::NoDFMR;
  if (needs_fixed && fixed_strategy < 0)
    throw UsageError("config: no-df ablations require fixed_strategy");
}

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  os << "h=" << h << "\n";
  os << "char_h=" << char_h << "\n";
  os << "char_dim=" << char_dim << "\n";
  os << "word_dim=" << word_dim << "\n";
  os << "n_perspectives=" << n_perspectives << "\n";
  os << "lambda=" << lambda << "\n";
  os << "t_max=" << t_max << "\n";
  os << "d_s=" << d_s << "\n";
  os << "n_strategies=" << n_strategies << "\n";
  os << "dropout=" << dropout << "\n";
  os << "lr=" << lr << "\n";
  os << "batch=" << batch << "\n";
  os << "max_passage=" << max_passage << "\n";
  os << "max_question=" << max_question << "\n";
  os << "max_answer=" << max_answer << "\n";
  os << "seed=" << seed << "\n";
  os << "ablation="
     << (ablation == Ablation::Full    ? "full"
         : ablation == Ablation::NoDF  ? "no-df"
         : ablation == Ablation::NoMR  ? "no-mr"
                                       : "no-df-mr")
     << "\n";
  os << "fixed_strategy="
     << (fixed_strategy < 0 ? "none" : strategy_name(fixed_strategy)) << "\n";
  os << "b_floor=" << b_floor << "\n";
  os << "epochs=" << epochs << "\n";
  os << "advantage=" << (advantage == Advantage::Ratio ? "ratio" : "rb") << "\n";
  os << "step0=" << (step0 ? "true" : "false") << "\n";
  return os.str();
}

TrainConfig TrainConfig::from_text(const std::string& text) {
  TrainConfig cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw UsageError("config line " + std::to_string(lineno) +
                       ": expected key=value, got '" + t + "'");
    cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return cfg;
}

TrainConfig TrainConfig::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw UsageError("cannot open config file: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return from_text(ss.str());
}

}  // namespace dfn
