#pragma once

#include <ostream>

#include "json.hpp"

#include "dfn/policy.hpp"

namespace dfn {

// {epoch, split, loss, expected_reward, accuracy, gate_entropy,
//  strategy_hist, step_hist} as one JSON line.
inline nlohmann::json metrics_json(const EpochMetrics& m) {
  return {{"epoch", m.epoch},
          {"split", m.split},
          {"loss", m.loss},
          {"expected_reward", m.expected_reward},
          {"accuracy", m.accuracy},
          {"gate_entropy", m.gate_entropy},
          {"strategy_hist", m.strategy_hist},
          {"step_hist", m.step_hist}};
}

inline void write_metrics_line(std::ostream& os, const EpochMetrics& m) {
  os << metrics_json(m).dump() << "\n";
}

inline nlohmann::json eval_record_json(const EvalRecord& r) {
  return {{"id", r.id},
          {"family", r.family},
          {"gold", r.gold},
          {"pred", r.decision.answer},
          {"strategy", strategy_name(r.decision.strategy)},
          {"step", r.decision.step},
          {"correct", r.decision.correct},
          {"answer_dist", r.answer_dist}};
}

inline nlohmann::json keyword_row_json(const KeywordRow& row) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& [cell, cnt] : row.cells)
    cells.push_back({{"strategy", strategy_name(cell.first)},
                     {"step", cell.second},
                     {"count", cnt}});
  nlohmann::json j = {{"keyword", row.keyword},
                      {"count", row.count},
                      {"cells", cells}};
  if (row.count > 0 && row.dom_strategy >= 0) {
    j["dominant_strategy"] = strategy_name(row.dom_strategy);
    j["dominant_step"] = row.dom_step;
    j["share"] = row.share;
  } else {
    j["empty"] = true;
  }
  return j;
}

}  // namespace dfn
