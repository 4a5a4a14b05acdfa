#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "xf2t/fact_model.hpp"
#include "xf2t/linearizer.hpp"
#include "xf2t/model.hpp"
#include "xf2t/translator.hpp"

namespace xf2t {

struct TrainConfig {
  double learning_rate = 3e-5;
  double weight_decay = 0.001;
  size_t batch_size = 20;
  double dropout = 0.1;
  size_t epochs_finetune = 30;
  size_t epochs_pretrain = 7;
  uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Zero learning rate and zero weight decay are accepted (they make a null
/// update); negative values are not.
inline void validate(const TrainConfig& c) {
  if (!(c.learning_rate >= 0.0) || !(c.weight_decay >= 0.0) || c.batch_size == 0 ||
      !(c.dropout >= 0.0 && c.dropout < 1.0) || !(c.beta1 >= 0.0 && c.beta1 < 1.0) ||
      !(c.beta2 >= 0.0 && c.beta2 < 1.0) || !(c.epsilon > 0.0)) {
    throw std::invalid_argument("train config: invalid hyperparameter");
  }
}

struct Setup {
  enum class Kind { Multilingual, Bilingual, TranslateInput, TranslateOutput };

  Kind kind = Kind::Multilingual;
  std::string language;  // Bilingual only

  static Setup multilingual() { return {Kind::Multilingual, {}}; }
  static Setup bilingual(std::string lang) { return {Kind::Bilingual, std::move(lang)}; }
  static Setup translate_input() { return {Kind::TranslateInput, {}}; }
  static Setup translate_output() { return {Kind::TranslateOutput, {}}; }

  bool needs_translator() const {
    return kind == Kind::TranslateInput || kind == Kind::TranslateOutput;
  }

  /// "multilingual", "bilingual:<lang>", "translate_input", "translate_output".
  static Setup parse(std::string_view s) {
    if (s == "multilingual") return multilingual();
    if (s == "translate_input") return translate_input();
    if (s == "translate_output") return translate_output();
    constexpr std::string_view prefix = "bilingual:";
    if (s.substr(0, prefix.size()) == prefix && s.size() > prefix.size()) {
      return bilingual(std::string(s.substr(prefix.size())));
    }
    throw std::invalid_argument("unknown setup \"" + std::string(s) + "\"");
  }

  std::string name() const {
    switch (kind) {
      case Kind::Multilingual: return "multilingual";
      case Kind::Bilingual: return "bilingual:" + language;
      case Kind::TranslateInput: return "translate_input";
      case Kind::TranslateOutput: return "translate_output";
    }
    return {};
  }
};

struct ViewOptions {
  /// Tag of the language whose references count as English.
  std::string english_language = "en";
};

inline std::vector<TokenId> encode_text(const Vocabulary& vocab, std::string_view s) {
  return vocab.encode(text::split_words(s));
}

namespace detail {

inline FactTriple translate_fact(const FactTriple& f, const Translator& tr, std::string_view from,
                                 std::string_view to) {
  FactTriple out = f;
  out.subject = tr.translate(f.subject, from, to);
  out.relation = tr.translate(f.relation, from, to);
  out.object = tr.translate(f.object, from, to);
  for (auto& q : out.qualifiers) {
    q.qual_relation = tr.translate(q.qual_relation, from, to);
    q.qual_value = tr.translate(q.qual_value, from, to);
  }
  return out;
}

}  // namespace detail

/// Maps a validated corpus to (source, target) pairs for one training setup.
inline std::vector<Example> build_view(const Corpus& corpus, const Setup& setup,
                                       const Vocabulary& vocab,
                                       const Translator* translator = nullptr,
                                       const ViewOptions& opts = {}) {
  if (setup.needs_translator() && translator == nullptr) {
    throw std::invalid_argument("build_view: setup " + setup.name() + " requires a translator");
  }
  const Translator* const tr = translator;
  std::vector<Example> view;
  switch (setup.kind) {
    case Setup::Kind::Multilingual:
    case Setup::Kind::Bilingual: {
      bool found = false;
      for (const auto& inst : corpus) {
        if (setup.kind == Setup::Kind::Bilingual && inst.language != setup.language) continue;
        found = true;
        view.push_back({linearize(inst.facts, inst.language, inst.section_title, vocab),
                        encode_text(vocab, inst.reference_text)});
      }
      if (setup.kind == Setup::Kind::Bilingual && !found) {
        throw std::invalid_argument("build_view: language " + setup.language +
                                    " is absent from the corpus");
      }
      break;
    }
    case Setup::Kind::TranslateInput:
      if (tr == nullptr) break;
      for (const auto& inst : corpus) {
        std::vector<FactTriple> facts;
        for (const auto& f : inst.facts) {
          facts.push_back(
              detail::translate_fact(f, *tr, opts.english_language, inst.language));
        }
        view.push_back({linearize(facts, inst.language, inst.section_title, vocab),
                        encode_text(vocab, inst.reference_text)});
      }
      break;
    case Setup::Kind::TranslateOutput: {
      std::map<std::string, const CorpusInstance*> english;
      for (const auto& inst : corpus) {
        if (inst.language == opts.english_language) english.emplace(inst.entity_id, &inst);
      }
      for (const auto& inst : corpus) {
        auto it = english.find(inst.entity_id);
        if (it == english.end()) continue;
        view.push_back(
            {linearize(inst.facts, opts.english_language, inst.section_title, vocab),
             encode_text(vocab, it->second->reference_text)});
      }
      break;
    }
  }
  return view;
}

// Pretraining.

enum class PretrainKind { None, EnglishOnly, Multilingual, MultiStage, MultiTask };

inline PretrainKind parse_pretrain_kind(std::string_view s) {
  if (s == "none") return PretrainKind::None;
  if (s == "english_only") return PretrainKind::EnglishOnly;
  if (s == "multilingual") return PretrainKind::Multilingual;
  if (s == "multi_stage") return PretrainKind::MultiStage;
  if (s == "multi_task") return PretrainKind::MultiTask;
  throw std::invalid_argument("unknown pretrain plan \"" + std::string(s) + "\"");
}

/// English text and its translation into `language`.
struct TranslationPair {
  std::string language;
  std::string source;
  std::string target;
};

struct Phase {
  std::string name;
  std::vector<Example> examples;
  size_t epochs = 0;
  /// Examples alternate between tasks; the trainer shuffles within each task
  /// and re-interleaves every epoch instead of shuffling globally.
  bool interleaved = false;
};

inline Example translation_example(const TranslationPair& p, const Vocabulary& vocab) {
  if (!vocab.has_language(p.language)) {
    throw std::invalid_argument("translation pair: unknown language " + p.language);
  }
  std::vector<std::string> words{std::string(kTranslateToken), p.language};
  for (auto& w : text::split_words(p.source)) words.push_back(std::move(w));
  std::vector<RoleId> roles(words.size(), RoleId::Other);
  return {LinearizedInput(text::join(words), vocab.encode(words), std::move(roles)),
          encode_text(vocab, p.target), "translation"};
}

namespace detail {

template <class T>
void seeded_shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng() % i]);
}

/// Alternates a, b, a, b, ... and appends whatever is left of the longer list.
inline std::vector<Example> interleave(const std::vector<Example>& a,
                                       const std::vector<Example>& b) {
  std::vector<Example> out;
  out.reserve(a.size() + b.size());
  for (size_t i = 0; i < std::max(a.size(), b.size()); ++i) {
    if (i < a.size()) out.push_back(a[i]);
    if (i < b.size()) out.push_back(b[i]);
  }
  return out;
}

inline void split_by_task(const std::vector<Example>& all, std::vector<Example>& translation,
                          std::vector<Example>& other) {
  for (const auto& e : all) (e.task == "translation" ? translation : other).push_back(e);
}

}  // namespace detail

inline std::vector<Phase> build_pretrain_plan(PretrainKind kind, const Corpus& pretrain_corpus,
                                              const std::vector<TranslationPair>& pairs,
                                              const Vocabulary& vocab, const TrainConfig& config,
                                              const ViewOptions& opts = {}) {
  const size_t epochs = config.epochs_pretrain;
  auto xf2t_view = [&](bool english_only) {
    Corpus subset;
    for (const auto& inst : pretrain_corpus) {
      if (!english_only || inst.language == opts.english_language) subset.push_back(inst);
    }
    if (subset.empty()) {
      throw std::invalid_argument(english_only ? "pretrain plan: no English pretraining data"
                                               : "pretrain plan: empty pretraining corpus");
    }
    return build_view(subset, Setup::multilingual(), vocab, nullptr, opts);
  };
  auto translation_view = [&] {
    if (pairs.empty()) throw std::invalid_argument("pretrain plan: translation pairs required");
    std::vector<Example> v;
    for (const auto& p : pairs) v.push_back(translation_example(p, vocab));
    return v;
  };

  switch (kind) {
    case PretrainKind::None:
      return {};
    case PretrainKind::EnglishOnly:
      return {{"pretrain-english", xf2t_view(true), epochs, false}};
    case PretrainKind::Multilingual:
      return {{"pretrain-multilingual", xf2t_view(false), epochs, false}};
    case PretrainKind::MultiStage: {
      auto translation = translation_view();
      return {{"pretrain-translation", std::move(translation), epochs, false},
              {"pretrain-multilingual", xf2t_view(false), epochs, false}};
    }
    case PretrainKind::MultiTask: {
      auto translation = translation_view();
      auto xf2t = xf2t_view(false);
      std::mt19937_64 rng(config.seed);
      detail::seeded_shuffle(translation, rng);
      detail::seeded_shuffle(xf2t, rng);
      return {{"pretrain-multitask", detail::interleave(translation, xf2t), epochs, true}};
    }
  }
  return {};
}

// Optimization.

struct AdamState {
  size_t step = 0;
  ModelParams m;
  ModelParams v;
};

inline void check_congruent(const ModelParams& a, const ModelParams& b) {
  auto ta = a.tensors();
  auto tb = b.tensors();
  if (ta.size() != tb.size()) throw std::invalid_argument("adamw: tensor count mismatch");
  for (size_t i = 0; i < ta.size(); ++i) {
    if (ta[i].second->rows() != tb[i].second->rows() ||
        ta[i].second->cols() != tb[i].second->cols()) {
      throw std::invalid_argument("adamw: shape mismatch for " + ta[i].first);
    }
  }
}

/// p <- p - lr * m_hat / (sqrt(v_hat) + eps) - lr * wd * p, with the decay
/// computed from the pre-update value.
inline void adamw_step(ModelParams& params, const ModelParams& grads, AdamState& state,
                       const TrainConfig& cfg) {
  check_congruent(params, grads);
  if (state.step == 0) {
    state.m = params.zeros_like();
    state.v = params.zeros_like();
  } else {
    check_congruent(params, state.m);
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  auto p = params.tensors();
  auto g = grads.tensors();
  auto m = state.m.tensors();
  auto v = state.v.tensors();
  for (size_t k = 0; k < p.size(); ++k) {
    double* pd = p[k].second->data();
    const double* gd = g[k].second->data();
    double* md = m[k].second->data();
    double* vd = v[k].second->data();
    const Eigen::Index n = p[k].second->size();
    for (Eigen::Index i = 0; i < n; ++i) {
      md[i] = cfg.beta1 * md[i] + (1.0 - cfg.beta1) * gd[i];
      vd[i] = cfg.beta2 * vd[i] + (1.0 - cfg.beta2) * gd[i] * gd[i];
      const double mhat = md[i] / c1;
      const double vhat = vd[i] / c2;
      const double old = pd[i];
      pd[i] = old - cfg.learning_rate * (mhat / (std::sqrt(vhat) + cfg.epsilon)) -
              cfg.learning_rate * cfg.weight_decay * old;
    }
  }
}

struct HistoryRow {
  size_t epoch = 0;  // 1-based within its phase
  std::string phase;
  double mean_loss = 0.0;
};

inline void write_history_csv(const std::vector<HistoryRow>& rows, std::ostream& out) {
  out << "epoch,phase,mean_loss\n";
  out.precision(17);
  for (const auto& r : rows) out << r.epoch << ',' << r.phase << ',' << r.mean_loss << '\n';
}

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainResult {
  ModelParams params;
  std::vector<HistoryRow> history;
};

using EpochCallback = std::function<void(const HistoryRow&)>;

/// Runs the given pretraining phases, then `finetune` for
/// config.epochs_finetune epochs. Each phase starts with fresh optimizer
/// moments.
inline TrainResult train(ModelParams params, const std::vector<Phase>& phases,
                         const std::vector<Example>& finetune, const TrainConfig& config,
                         const EpochCallback& on_epoch = {}) {
  validate(config);
  if (finetune.empty()) throw std::invalid_argument("train: empty finetuning view");
  for (const auto& ph : phases) {
    if (ph.examples.empty()) throw std::invalid_argument("train: empty phase " + ph.name);
  }
  std::vector<Phase> schedule = phases;
  schedule.push_back({"finetune", finetune, config.epochs_finetune, false});

  TrainResult result{std::move(params), {}};
  std::mt19937_64 order_rng(config.seed);
  std::mt19937_64 dropout_rng(config.seed ^ 0x9E3779B97F4A7C15ULL);
  ForwardOptions fopts;
  fopts.train_mode = config.dropout > 0.0;
  fopts.rng = &dropout_rng;
  fopts.dropout_rate = config.dropout;

  for (const auto& phase : schedule) {
    AdamState state;
    std::vector<Example> translation, other;
    if (phase.interleaved) detail::split_by_task(phase.examples, translation, other);
    for (size_t epoch = 1; epoch <= phase.epochs; ++epoch) {
      std::vector<const Example*> order;
      if (phase.interleaved) {
        std::vector<size_t> ti(translation.size()), oi(other.size());
        for (size_t i = 0; i < ti.size(); ++i) ti[i] = i;
        for (size_t i = 0; i < oi.size(); ++i) oi[i] = i;
        detail::seeded_shuffle(ti, order_rng);
        detail::seeded_shuffle(oi, order_rng);
        for (size_t i = 0; i < std::max(ti.size(), oi.size()); ++i) {
          if (i < ti.size()) order.push_back(&translation[ti[i]]);
          if (i < oi.size()) order.push_back(&other[oi[i]]);
        }
      } else {
        for (const auto& e : phase.examples) order.push_back(&e);
        detail::seeded_shuffle(order, order_rng);
      }
      double total = 0.0;
      size_t batches = 0;
      for (size_t start = 0; start < order.size(); start += config.batch_size) {
        const size_t end = std::min(order.size(), start + config.batch_size);
        const Batch batch = make_batch(std::span<const Example* const>(order.data() + start, end - start));
        LossAndGrads lg = loss_and_grads(result.params, batch, fopts);
        if (!std::isfinite(lg.loss)) {
          throw TrainingError("non-finite loss at batch " + std::to_string(batches) + " (phase " +
                              phase.name + ", epoch " + std::to_string(epoch) + ")");
        }
        adamw_step(result.params, lg.grads, state, config);
        total += lg.loss;
        ++batches;
      }
      HistoryRow row{epoch, phase.name, total / static_cast<double>(batches)};
      result.history.push_back(row);
      if (on_epoch) on_epoch(row);
    }
  }
  return result;
}

}  // namespace xf2t
