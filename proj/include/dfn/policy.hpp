#pragma once

#include <functional>
#include <map>
#include <memory>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "dfn/forward.hpp"

namespace dfn {

// ---- deterministic batch execution ------------------------------------
//
// A batch is cut into fixed-size chunks. Chunks run in parallel, each
// accumulating into its own gradient buffer and result slots; buffers are
// then folded in chunk order, so results are bit-identical for any thread
// count. A plain sample-by-sample serial path is kept as a reference.

constexpr int kChunk = 8;

template <class T>
struct BatchScratch {
  std::vector<std::unique_ptr<Tape<T>>> tapes;  // one per thread
  std::vector<GradBuffer<T>> bufs;              // one per chunk

  // Call reserve_threads() before entering a parallel region; each thread
  // then touches only its own slot.
  void reserve_threads() {
#ifdef _OPENMP
    size_t n = size_t(omp_get_max_threads());
#else
    size_t n = 1;
#endif
    if (tapes.size() < n) tapes.resize(n);
  }

  Tape<T>& tape_for_thread(ParamSet<T>& ps) {
#ifdef _OPENMP
    int tid = omp_get_thread_num();
#else
    int tid = 0;
#endif
    if (!tapes[tid]) tapes[tid] = std::make_unique<Tape<T>>(&ps);
    return *tapes[tid];
  }
};

inline uint64_t sample_seed(uint64_t run_seed, int epoch, int corpus_index) {
  return SplitMix64::mix(SplitMix64::mix(run_seed, 0xD50 + uint64_t(epoch)),
                         uint64_t(corpus_index));
}

template <class T>
struct BatchOut {
  std::vector<double> losses;
  std::vector<EpisodeTrace> traces;
};

// Forward (and optionally backward) over a list of corpus indices. When
// training, gradients land in ParamSet::g scaled by 1/batch.
template <class T>
BatchOut<T> process_batch(ModelParams<T>& model,
                          const std::vector<Sample>& corpus,
                          const std::vector<int>& idx, int epoch,
                          bool training, bool parallel,
                          BatchScratch<T>& scratch) {
  const int n = int(idx.size());
  const int nchunks = (n + kChunk - 1) / kChunk;
  BatchOut<T> out;
  out.losses.assign(n, 0.0);
  out.traces.resize(n);
  scratch.reserve_threads();
  if (training) {
    if (int(scratch.bufs.size()) < nchunks) scratch.bufs.resize(nchunks);
    for (int c = 0; c < nchunks; ++c) {
      if (scratch.bufs[c].g.empty()) scratch.bufs[c].match(model.set);
      scratch.bufs[c].zero();
    }
  }
  std::string bad_sample;

#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1) if (parallel)
#endif
  for (int c = 0; c < nchunks; ++c) {
    Tape<T>& tp = scratch.tape_for_thread(model.set);
    for (int k = c * kChunk; k < std::min(n, (c + 1) * kChunk); ++k) {
      const Sample& s = corpus[idx[k]];
      tp.reset();
      RunCtx<T> ctx(tp, model, training,
                    sample_seed(model.cfg.seed, epoch, idx[k]));
      ForwardOut<T> fo = run_sample(ctx, s, training);
      out.traces[k] = std::move(fo.trace);
      if (training) {
        double loss = double(tp.scalar(fo.loss));
        out.losses[k] = loss;
        if (!std::isfinite(loss)) {
#ifdef _OPENMP
#pragma omp critical
#endif
          bad_sample = s.id;
          continue;
        }
        tp.backward(fo.loss, T(1.0 / n));
        tp.export_grads(scratch.bufs[c]);
      }
    }
  }
  if (!bad_sample.empty())
    throw NumericError("non-finite loss on sample " + bad_sample);
  if (training)
    for (int c = 0; c < nchunks; ++c) fold_grads(model.set, scratch.bufs[c]);
  return out;
}

// Reference implementation: one sample at a time, direct accumulation.
template <class T>
BatchOut<T> process_batch_serial_ref(ModelParams<T>& model,
                                     const std::vector<Sample>& corpus,
                                     const std::vector<int>& idx, int epoch,
                                     bool training) {
  const int n = int(idx.size());
  BatchOut<T> out;
  out.losses.assign(n, 0.0);
  out.traces.resize(n);
  Tape<T> tp(&model.set);
  GradBuffer<T> buf;
  if (training) buf.match(model.set);
  for (int k = 0; k < n; ++k) {
    const Sample& s = corpus[idx[k]];
    tp.reset();
    RunCtx<T> ctx(tp, model, training,
                  sample_seed(model.cfg.seed, epoch, idx[k]));
    ForwardOut<T> fo = run_sample(ctx, s, training);
    out.traces[k] = std::move(fo.trace);
    if (training) {
      out.losses[k] = double(tp.scalar(fo.loss));
      if (!std::isfinite(out.losses[k]))
        throw NumericError("non-finite loss on sample " + s.id);
      tp.backward(fo.loss, T(1.0 / n));
      tp.export_grads(buf);
    }
  }
  if (training) fold_grads(model.set, buf);
  return out;
}

// ---- training loop -------------------------------------------------------

struct EpochMetrics {
  int epoch = 0;
  std::string split = "train";
  double loss = 0, expected_reward = 0, accuracy = 0, gate_entropy = 0;
  std::vector<double> strategy_hist;  // fraction of greedy picks, by strategy
  std::vector<double> step_hist;      // fraction of greedy stop steps
};

inline void fill_metrics(EpochMetrics& m, const std::vector<double>& losses,
                         const std::vector<EpisodeTrace>& traces, int t_max) {
  m.strategy_hist.assign(kNumStrategies, 0.0);
  m.step_hist.assign(t_max + 1, 0.0);
  double n = double(traces.size());
  for (double l : losses) m.loss += l;
  m.loss /= std::max(1.0, double(losses.size()));
  for (const auto& tr : traces) {
    m.expected_reward += tr.expected_reward();
    m.gate_entropy += tr.gate_entropy();
    auto d = tr.greedy();
    m.accuracy += d.correct ? 1 : 0;
    m.strategy_hist[d.strategy] += 1;
    if (d.step < int(m.step_hist.size())) m.step_hist[d.step] += 1;
  }
  m.expected_reward /= n;
  m.gate_entropy /= n;
  m.accuracy /= n;
  for (auto& x : m.strategy_hist) x /= n;
  for (auto& x : m.step_hist) x /= n;
}

template <class T>
struct TrainOpts {
  bool parallel = true;
  std::function<void(const EpochMetrics&)> on_epoch;
};

// ADAM over batched surrogate losses. Per-epoch metrics are measured on the
// training pass itself (dropout active, pre-update forward values).
template <class T>
void train(ModelParams<T>& model, const std::vector<Sample>& corpus,
           const TrainOpts<T>& opts = {}) {
  const TrainConfig& cfg = model.cfg;
  AdamState<T> adam;
  adam.match(model.set);
  BatchScratch<T> scratch;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    auto batches = epoch_batches(int(corpus.size()), cfg.batch, cfg.seed, epoch);
    std::vector<double> losses;
    std::vector<EpisodeTrace> traces;
    losses.reserve(corpus.size());
    traces.reserve(corpus.size());
    for (const auto& batch : batches) {
      model.set.zero_grad();
      BatchOut<T> bo = process_batch(model, corpus, batch, epoch,
                                     /*training=*/true, opts.parallel, scratch);
      adam_step(model.set, adam, cfg.lr);
      for (double l : bo.losses) losses.push_back(l);
      for (auto& t : bo.traces) traces.push_back(std::move(t));
    }
    if (opts.on_epoch) {
      EpochMetrics m;
      m.epoch = epoch;
      fill_metrics(m, losses, traces, cfg.t_max);
      opts.on_epoch(m);
    }
  }
}

// ---- evaluation ---------------------------------------------------------

struct EvalRecord {
  std::string id, family;
  int gold = 0;
  EpisodeTrace::Decision decision;
  std::vector<double> answer_dist;  // at the decided (strategy, step)
};

struct EvalResult {
  double accuracy = 0;
  std::vector<EvalRecord> records;
  std::vector<EpisodeTrace> traces;
};

enum class EvalMode { Greedy, Sampled };

template <class T>
EvalResult evaluate(ModelParams<T>& model, const std::vector<Sample>& corpus,
                    EvalMode mode = EvalMode::Greedy, bool parallel = true,
                    uint64_t sample_seed = 0) {
  std::vector<int> idx(corpus.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = int(i);
  BatchScratch<T> scratch;
  BatchOut<T> bo = process_batch(model, corpus, idx, /*epoch=*/0,
                                 /*training=*/false, parallel, scratch);
  EvalResult res;
  res.records.resize(corpus.size());
  for (size_t i = 0; i < corpus.size(); ++i) {
    const EpisodeTrace& tr = bo.traces[i];
    EvalRecord& rec = res.records[i];
    rec.id = corpus[i].id;
    rec.family = corpus[i].family;
    rec.gold = corpus[i].gold;
    if (mode == EvalMode::Greedy) {
      rec.decision = tr.greedy();
    } else {
      SplitMix64 rng(SplitMix64::mix(sample_seed, uint64_t(i)));
      rec.decision = tr.sample(rng);
    }
    int si = 0;
    for (int s = 0; s < tr.num_strategies(); ++s)
      if (tr.strategies[s] == rec.decision.strategy) si = s;
    rec.answer_dist = tr.ans[si][rec.decision.step - tr.first_step];
    if (rec.decision.correct) res.accuracy += 1;
  }
  res.accuracy /= std::max<size_t>(1, corpus.size());
  res.traces = std::move(bo.traces);
  return res;
}

// ---- keyword / strategy analysis (Pr[G, T | w in question]) ----------------

struct KeywordRow {
  std::string keyword;
  int count = 0;
  std::map<std::pair<int, int>, int> cells;  // (strategy, step) -> count
  int dom_strategy = -1, dom_step = -1;
  double share = 0;  // dominant cell share
};

inline std::vector<KeywordRow> strategy_stats(
    const std::vector<Sample>& corpus, const std::vector<EvalRecord>& records,
    const std::vector<std::string>& keywords) {
  std::vector<KeywordRow> rows;
  for (const auto& kw : keywords) {
    KeywordRow row;
    row.keyword = kw;
    for (size_t i = 0; i < corpus.size(); ++i) {
      bool has = false;
      for (const auto& t : corpus[i].question)
        if (t == kw) has = true;
      if (!has) continue;
      row.count++;
      row.cells[{records[i].decision.strategy, records[i].decision.step}]++;
    }
    for (const auto& [cell, cnt] : row.cells) {
      if (double(cnt) / row.count > row.share) {
        row.dom_strategy = cell.first;
        row.dom_step = cell.second;
        row.share = double(cnt) / row.count;
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---- ensemble -----------------------------------------------------------

// Average of the members' answer distributions at each member's own greedy
// (strategy, step); the arithmetic-mean distribution is argmaxed.
template <class T>
double ensemble_eval(std::vector<ModelParams<T>*> members,
                     const std::vector<Sample>& corpus, bool parallel = true) {
  if (members.empty()) throw UsageError("ensemble: no members");
  std::vector<std::vector<std::vector<double>>> dists;  // member x sample x r
  for (auto* m : members) {
    EvalResult r = evaluate(*m, corpus, EvalMode::Greedy, parallel);
    std::vector<std::vector<double>> d;
    for (auto& rec : r.records) d.push_back(rec.answer_dist);
    dists.push_back(std::move(d));
  }
  double correct = 0;
  for (size_t i = 0; i < corpus.size(); ++i) {
    std::vector<double> mean(corpus[i].candidates.size(), 0.0);
    for (const auto& d : dists)
      for (size_t c = 0; c < mean.size(); ++c) mean[c] += d[i][c];
    int best = 0;
    for (size_t c = 1; c < mean.size(); ++c)
      if (mean[c] > mean[best]) best = int(c);
    if (best == corpus[i].gold) correct += 1;
  }
  return correct / std::max<size_t>(1, corpus.size());
}

}  // namespace dfn
