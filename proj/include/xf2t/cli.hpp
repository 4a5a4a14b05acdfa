#pragma once

// The `xf2t` command-line tool. Exit codes: 0 success, 1 data error (bad
// input files, unreachable scorer, ...), 2 usage error.

#include <algorithm>
#include <array>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "xf2t/remote_scorer.hpp"  // before Eigen users; see the note there
#include "json.hpp"
#include "xf2t/aligner.hpp"
#include "xf2t/checkpoint.hpp"
#include "xf2t/fact_model.hpp"
#include "xf2t/linearizer.hpp"
#include "xf2t/metrics.hpp"
#include "xf2t/model.hpp"
#include "xf2t/presets.hpp"
#include "xf2t/synth.hpp"
#include "xf2t/trainer.hpp"

namespace xf2t::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitData = 1;
inline constexpr int kExitUsage = 2;

/// Flag values that parse but make no sense together.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input that cannot be used: unreadable files, malformed records.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return in;
}

/// "-" writes to `fallback` (standard output).
class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) {
    if (path == "-") {
      os_ = &fallback;
    } else {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw DataError("cannot open " + path + " for writing");
      os_ = file_.get();
    }
  }
  std::ostream& operator*() { return *os_; }
  void close() {
    os_->flush();
    if (!*os_) throw DataError("write failed");
  }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* os_ = nullptr;
};

inline Corpus read_corpus(const std::string& path) {
  auto in = open_in(path);
  try {
    return parse_corpus(in);
  } catch (const CorpusError& e) {
    throw DataError(path + ": " + e.what());
  }
}

inline std::vector<TranslationPair> read_translation_pairs(const std::string& path) {
  auto in = open_in(path);
  std::vector<TranslationPair> pairs;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::split_words(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      pairs.push_back({j.at("language").get<std::string>(), j.at("source").get<std::string>(),
                       j.at("target").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ": line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return pairs;
}

inline std::vector<metrics::Prediction> read_predictions(const std::string& path) {
  auto in = open_in(path);
  std::vector<metrics::Prediction> preds;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::split_words(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      preds.push_back({j.at("language").get<std::string>(), j.at("hypothesis").get<std::string>(),
                       j.at("reference").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ": line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (preds.empty()) throw DataError(path + ": no predictions");
  return preds;
}

inline std::array<double, 4> parse_distribution(const std::string& s) {
  std::array<double, 4> d{};
  std::stringstream ss(s);
  std::string part;
  size_t i = 0;
  while (std::getline(ss, part, ',')) {
    if (i == 4) throw UsageError("--facts-dist takes exactly 4 comma-separated values");
    try {
      d[i++] = std::stod(part);
    } catch (const std::exception&) {
      throw UsageError("--facts-dist: \"" + part + "\" is not a number");
    }
  }
  if (i != 4) throw UsageError("--facts-dist takes exactly 4 comma-separated values");
  return d;
}

inline nlohmann::json fact_json(const FactTriple& f) { return to_json(f); }

/// Equality over what the surface form carries; property_kind is not in it.
inline bool same_surface_facts(const std::vector<FactTriple>& a, const std::vector<FactTriple>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].subject != b[i].subject || a[i].relation != b[i].relation || a[i].object != b[i].object ||
        a[i].qualifiers != b[i].qualifiers) {
      return false;
    }
  }
  return true;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Subcommand options.

struct SynthOptions {
  synth::SynthSpec spec;
  std::string facts_dist;
  std::string out = "-";
  std::string heldout_out;
  double heldout_fraction = 0.2;
};

struct StatsOptions {
  std::string corpus;
  size_t top_k = 10;
};

struct LinearizeOptions {
  std::string corpus;
  std::string out = "-";
};

struct AlignOptions {
  std::string corpus;
  std::string out = "-";
  size_t top_k = align::kDefaultTopK;
  std::string scorer_url;
  double threshold = 0.5;
  size_t max_in_flight = 4;
  int timeout_ms = 5000;
  bool synth_translator = false;
  std::string fact_language = "en-toy";
};

struct TrainOptions {
  std::string config;
  std::string train;
  std::string pretrain_corpus;
  std::string translation_pairs;
  std::string setup = "multilingual";
  std::string pretrain = "none";
  std::string checkpoint = "model.ckpt";
  std::string history = "history.csv";
  std::string vocab_out;
  std::string english_language = "en-toy";
  bool synth_translator = false;
  size_t vocab_max = 32000;
  ModelConfig model = desk_model_config(0);
  TrainConfig train_cfg = desk_train_config();
  bool no_roles = false;
  bool tie_output = false;
  bool quiet = false;
};

struct GenerateOptions {
  std::string checkpoint;
  std::string corpus;
  std::string out = "-";
  std::string setup = "multilingual";
  std::string english_language = "en-toy";
  bool synth_translator = false;
  size_t beam = 4;
  size_t max_len = 64;
  double length_norm = 1.0;
};

struct EvaluateOptions {
  std::string predictions;
  std::string out;
  bool json = false;
};

// ---------------------------------------------------------------------------
// Subcommand bodies.

inline void run_synth(const SynthOptions& o, std::ostream& out) {
  synth::SynthSpec spec = o.spec;
  if (!o.facts_dist.empty()) spec.facts_distribution = detail::parse_distribution(o.facts_dist);
  try {
    synth::validate(spec);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (!(o.heldout_fraction > 0.0 && o.heldout_fraction < 1.0)) {
    throw UsageError("--heldout-fraction must be in (0, 1)");
  }
  const Corpus corpus = synth::synth_corpus(spec);
  if (o.heldout_out.empty()) {
    detail::Output os(o.out, out);
    serialize_corpus(corpus, *os);
    os.close();
    return;
  }
  const auto [train, held] = synth::split_by_entity(corpus, o.heldout_fraction, spec.seed);
  detail::Output a(o.out, out);
  serialize_corpus(train, *a);
  a.close();
  detail::Output b(o.heldout_out, out);
  serialize_corpus(held, *b);
  b.close();
}

inline void run_stats(const StatsOptions& o, std::ostream& out) {
  if (o.top_k == 0) throw UsageError("--top-k must be positive");
  const Corpus corpus = detail::read_corpus(o.corpus);
  if (corpus.empty()) throw DataError(o.corpus + ": empty corpus");
  out << to_json(corpus_stats(corpus, o.top_k)).dump(2) << '\n';
}

/// One JSON line per instance with the surface form and per-token roles.
/// Every line is delinearized again and compared with the source record.
inline void run_linearize(const LinearizeOptions& o, std::ostream& out) {
  const Corpus corpus = detail::read_corpus(o.corpus);
  detail::Output os(o.out, out);
  for (const auto& inst : corpus) {
    const auto lw = linearize_words(inst.facts, inst.language, inst.section_title);
    const std::string surface = text::join(lw.words);
    const Delinearized back = delinearize(surface);
    if (!detail::same_surface_facts(back.facts, inst.facts) || back.language != inst.language ||
        back.section_title != text::normalize_space(inst.section_title)) {
      throw DataError("linearize: round trip failed for entity " + inst.entity_id + " (" +
                      inst.language + ")");
    }
    std::vector<int> roles;
    for (auto r : lw.roles) roles.push_back(static_cast<int>(r));
    *os << nlohmann::json{{"entity_id", inst.entity_id},
                          {"language", inst.language},
                          {"surface", surface},
                          {"roles", roles}}
               .dump()
        << '\n';
  }
  os.close();
}

inline void run_align(const AlignOptions& o, std::ostream& out) {
  if (o.top_k == 0) throw UsageError("--top-k must be positive");
  if (o.max_in_flight == 0) throw UsageError("--max-in-flight must be positive");
  if (!(o.threshold >= 0.0 && o.threshold <= 1.0)) throw UsageError("--threshold must be in [0, 1]");
  std::unique_ptr<align::EntailmentScorer> scorer;
  if (o.scorer_url.empty()) {
    scorer = std::make_unique<align::LexicalScorer>(o.threshold);
  } else {
    try {
      scorer = std::make_unique<align::RemoteScorer>(
          o.scorer_url, align::RemoteScorerOptions{std::chrono::milliseconds(o.timeout_ms), o.max_in_flight});
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  const synth::SynthTranslator translator;
  const Corpus corpus = detail::read_corpus(o.corpus);
  detail::Output os(o.out, out);
  for (const auto& inst : corpus) {
    align::Stage1Options s1;
    s1.top_k = o.top_k;
    s1.sentence_language = inst.language;
    s1.fact_language = o.fact_language;
    if (o.synth_translator) s1.translator = &translator;
    const auto cs = align::stage1_candidates(inst.reference_text, inst.facts, s1);
    align::AlignmentResult r;
    try {
      r = align::stage2_filter(cs, *scorer, o.max_in_flight);
    } catch (const align::AlignmentError& e) {
      throw DataError(e.what());
    }
    nlohmann::json cands = nlohmann::json::array();
    for (size_t i = 0; i < cs.candidates.size(); ++i) {
      cands.push_back({{"fact", detail::fact_json(cs.candidates[i].fact)},
                       {"stage1_score", cs.candidates[i].score},
                       {"entail_prob", r.scored[i].output.entail_prob},
                       {"label", align::to_string(r.scored[i].output.label)}});
    }
    nlohmann::json aligned = nlohmann::json::array();
    for (const auto& f : r.aligned) aligned.push_back(detail::fact_json(f));
    *os << nlohmann::json{{"entity_id", inst.entity_id},
                          {"language", inst.language},
                          {"sentence", inst.reference_text},
                          {"candidates", std::move(cands)},
                          {"aligned", std::move(aligned)}}
               .dump()
        << '\n';
  }
  os.close();
}

/// Applies a run-config JSON on top of the flag values. Recognized keys:
/// setup, pretrain_plan, seed, hyperparameters{...}, model{...}, paths{...}.
inline void apply_config(TrainOptions& o, const std::string& path) {
  auto in = detail::open_in(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  }
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "setup") {
        o.setup = value.get<std::string>();
      } else if (key == "pretrain_plan") {
        o.pretrain = value.get<std::string>();
      } else if (key == "seed") {
        o.train_cfg.seed = value.get<uint64_t>();
        o.model.seed = o.train_cfg.seed;
      } else if (key == "english_language") {
        o.english_language = value.get<std::string>();
      } else if (key == "synth_translator") {
        o.synth_translator = value.get<bool>();
      } else if (key == "vocab_max") {
        o.vocab_max = value.get<size_t>();
      } else if (key == "hyperparameters") {
        for (const auto& [k, v] : value.items()) {
          if (k == "learning_rate") o.train_cfg.learning_rate = v.get<double>();
          else if (k == "weight_decay") o.train_cfg.weight_decay = v.get<double>();
          else if (k == "batch_size") o.train_cfg.batch_size = v.get<size_t>();
          else if (k == "dropout") o.train_cfg.dropout = v.get<double>();
          else if (k == "epochs_finetune") o.train_cfg.epochs_finetune = v.get<size_t>();
          else if (k == "epochs_pretrain") o.train_cfg.epochs_pretrain = v.get<size_t>();
          else throw DataError(path + ": unknown hyperparameter \"" + k + "\"");
        }
      } else if (key == "model") {
        const size_t vocab = o.model.vocab_size;
        nlohmann::json merged = to_json(o.model);
        for (const auto& [k, v] : value.items()) merged[k] = v;
        o.model = model_config_from_json(merged);
        o.model.vocab_size = vocab;
      } else if (key == "paths") {
        for (const auto& [k, v] : value.items()) {
          if (k == "train") o.train = v.get<std::string>();
          else if (k == "pretrain") o.pretrain_corpus = v.get<std::string>();
          else if (k == "translation_pairs") o.translation_pairs = v.get<std::string>();
          else if (k == "checkpoint") o.checkpoint = v.get<std::string>();
          else if (k == "history") o.history = v.get<std::string>();
          else if (k == "vocab") o.vocab_out = v.get<std::string>();
          else throw DataError(path + ": unknown path key \"" + k + "\"");
        }
      } else {
        throw DataError(path + ": unknown key \"" + key + "\"");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(path + ": " + e.what());
  }
}

inline void run_train(TrainOptions o, std::ostream& out) {
  if (!o.config.empty()) apply_config(o, o.config);
  if (o.train.empty()) throw UsageError("train: no training corpus (--train or paths.train)");
  Setup setup;
  PretrainKind plan_kind;
  try {
    setup = Setup::parse(o.setup);
    plan_kind = parse_pretrain_kind(o.pretrain);
    validate(o.train_cfg);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (setup.needs_translator() && !o.synth_translator) {
    throw UsageError("train: setup " + setup.name() + " needs --synth-translator");
  }
  if (o.no_roles) o.model.use_role_embeddings = false;
  if (o.tie_output) o.model.tie_output_embedding = true;
  o.model.seed = o.train_cfg.seed;

  const Corpus train_corpus = detail::read_corpus(o.train);
  if (train_corpus.empty()) throw DataError(o.train + ": empty corpus");
  Corpus pretrain_corpus;
  if (!o.pretrain_corpus.empty()) pretrain_corpus = detail::read_corpus(o.pretrain_corpus);
  std::vector<TranslationPair> pairs;
  if (!o.translation_pairs.empty()) pairs = detail::read_translation_pairs(o.translation_pairs);

  // Vocabulary over everything the model will see.
  Corpus all = train_corpus;
  all.insert(all.end(), pretrain_corpus.begin(), pretrain_corpus.end());
  std::vector<std::string> langs = corpus_languages(all);
  for (const auto& p : pairs) {
    if (std::find(langs.begin(), langs.end(), p.language) == langs.end()) langs.push_back(p.language);
  }
  std::sort(langs.begin(), langs.end());
  std::vector<std::string> texts;
  for (const auto& inst : all) {
    for (const auto& f : inst.facts) {
      texts.push_back(f.subject);
      texts.push_back(f.relation);
      texts.push_back(f.object);
      for (const auto& q : f.qualifiers) {
        texts.push_back(q.qual_relation);
        texts.push_back(q.qual_value);
      }
    }
    texts.push_back(inst.section_title);
    texts.push_back(inst.reference_text);
  }
  for (const auto& p : pairs) {
    texts.push_back(p.source);
    texts.push_back(p.target);
  }
  const synth::SynthTranslator translator;
  const ViewOptions vopts{o.english_language};
  if (setup.kind == Setup::Kind::TranslateInput) {
    // Translated fact fields must be in the vocabulary too.
    for (const auto& inst : train_corpus) {
      for (const auto& f : inst.facts) {
        const auto t = xf2t::detail::translate_fact(f, translator, o.english_language, inst.language);
        texts.push_back(t.subject);
        texts.push_back(t.relation);
        texts.push_back(t.object);
      }
    }
  }
  Vocabulary vocab;
  try {
    vocab = build_vocab_from_texts(texts, langs, o.vocab_max);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  o.model.vocab_size = vocab.size();

  std::vector<Example> view;
  std::vector<Phase> phases;
  try {
    view = build_view(train_corpus, setup, vocab, o.synth_translator ? &translator : nullptr, vopts);
    if (plan_kind != PretrainKind::None) {
      phases = build_pretrain_plan(plan_kind, pretrain_corpus.empty() ? train_corpus : pretrain_corpus, pairs,
                                   vocab, o.train_cfg, vopts);
    }
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  if (view.empty()) throw DataError("train: the " + setup.name() + " view is empty");

  ModelParams params;
  try {
    params = init_model(o.model);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  size_t longest = 0;
  for (const auto& e : view) longest = std::max({longest, e.source.tokens.size(), e.target.size() + 1});
  for (const auto& ph : phases) {
    for (const auto& e : ph.examples) longest = std::max({longest, e.source.tokens.size(), e.target.size() + 1});
  }
  if (longest > o.model.max_positions) {
    throw UsageError("train: sequences of length " + std::to_string(longest) + " exceed --max-positions " +
                     std::to_string(o.model.max_positions));
  }

  TrainResult result;
  try {
    result = train(std::move(params), phases, view, o.train_cfg, [&](const HistoryRow& r) {
      if (!o.quiet) out << r.phase << " epoch " << r.epoch << " loss " << r.mean_loss << '\n';
    });
  } catch (const TrainingError& e) {
    throw DataError(e.what());
  }
  save_checkpoint(o.checkpoint, result.params, vocab);
  {
    detail::Output hs(o.history, out);
    write_history_csv(result.history, *hs);
    hs.close();
  }
  if (!o.vocab_out.empty()) {
    detail::Output vs(o.vocab_out, out);
    vocab.save(*vs);
    vs.close();
  }
}

inline void run_generate(const GenerateOptions& o, std::ostream& out) {
  if (o.beam == 0) throw UsageError("--beam must be positive");
  if (o.max_len == 0) throw UsageError("--max-len must be positive");
  Setup setup;
  try {
    setup = Setup::parse(o.setup);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (setup.needs_translator() && !o.synth_translator) {
    throw UsageError("generate: setup " + setup.name() + " needs --synth-translator");
  }
  Checkpoint ck;
  try {
    ck = load_checkpoint(o.checkpoint);
  } catch (const CheckpointError& e) {
    throw DataError(e.what());
  }
  const Corpus corpus = detail::read_corpus(o.corpus);
  const synth::SynthTranslator translator;
  const BeamOptions bopts{o.beam, o.max_len, o.length_norm};
  detail::Output os(o.out, out);
  for (const auto& inst : corpus) {
    if (!ck.vocab.has_language(inst.language)) {
      throw DataError("generate: language " + inst.language + " is unknown to the checkpoint");
    }
    std::vector<FactTriple> facts = inst.facts;
    std::string control = inst.language;
    if (setup.kind == Setup::Kind::TranslateInput) {
      for (auto& f : facts) f = xf2t::detail::translate_fact(f, translator, o.english_language, inst.language);
    } else if (setup.kind == Setup::Kind::TranslateOutput) {
      control = o.english_language;
    } else if (setup.kind == Setup::Kind::Bilingual && inst.language != setup.language) {
      continue;
    }
    const LinearizedInput src = linearize(facts, control, inst.section_title, ck.vocab);
    if (src.tokens.size() > ck.params.config.max_positions) {
      throw DataError("generate: input for entity " + inst.entity_id + " exceeds max_positions");
    }
    std::string hyp = text::join(ck.vocab.decode(decode_best(ck.params, src, bopts)));
    if (setup.kind == Setup::Kind::TranslateOutput && inst.language != o.english_language) {
      hyp = translator.translate(hyp, o.english_language, inst.language);
    }
    *os << nlohmann::json{{"entity_id", inst.entity_id},
                          {"language", inst.language},
                          {"hypothesis", hyp},
                          {"reference", inst.reference_text}}
               .dump()
        << '\n';
  }
  os.close();
}

inline void run_evaluate(const EvaluateOptions& o, std::ostream& out) {
  const auto preds = detail::read_predictions(o.predictions);
  const auto report = metrics::evaluate(preds);
  if (o.json) {
    out << metrics::to_json(report).dump(2) << '\n';
  } else {
    out << metrics::format_table(report);
  }
  if (!o.out.empty()) {
    detail::Output os(o.out, out);
    *os << metrics::to_json(report).dump(2) << '\n';
    os.close();
  }
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Cross-lingual fact-to-text toolkit", "xf2t"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  SynthOptions so;
  auto* synth_cmd = app.add_subcommand("synth", "Emit a synthetic multilingual corpus (JSONL)");
  synth_cmd->add_option("--seed", so.spec.seed, "Generator seed")->capture_default_str();
  synth_cmd->add_option("--languages", so.spec.languages, "Toy language tags (-toy, -rev, -map)")
      ->delimiter(',')
      ->capture_default_str();
  synth_cmd->add_option("--instances", so.spec.instances_per_language, "Instances per language")
      ->capture_default_str();
  synth_cmd->add_option("--facts-dist", so.facts_dist, "P(1),P(2),P(3),P(4) facts per instance");
  synth_cmd->add_option("--out", so.out, "Corpus output path ('-' for stdout)")->capture_default_str();
  synth_cmd->add_option("--heldout-out", so.heldout_out,
                        "Also split by entity and write the held-out part here");
  synth_cmd->add_option("--heldout-fraction", so.heldout_fraction, "Fraction of entities held out")
      ->capture_default_str();

  StatsOptions st;
  auto* stats_cmd = app.add_subcommand("stats", "Corpus statistics as JSON");
  stats_cmd->add_option("corpus", st.corpus, "Corpus JSONL")->required();
  stats_cmd->add_option("--top-k", st.top_k, "Number of top relations")->capture_default_str();

  LinearizeOptions lo;
  auto* lin_cmd = app.add_subcommand("linearize", "Dump linearized inputs with roles");
  lin_cmd->add_option("corpus", lo.corpus, "Corpus JSONL")->required();
  lin_cmd->add_option("--out", lo.out, "Output path ('-' for stdout)")->capture_default_str();

  AlignOptions ao;
  auto* align_cmd = app.add_subcommand("align", "Two-stage fact/sentence alignment");
  align_cmd->add_option("corpus", ao.corpus, "Corpus JSONL; reference_text is the sentence")->required();
  align_cmd->add_option("--out", ao.out, "Output path ('-' for stdout)")->capture_default_str();
  align_cmd->add_option("--top-k", ao.top_k, "Stage-1 candidates per sentence")->capture_default_str();
  align_cmd->add_option("--scorer-url", ao.scorer_url,
                        "Entailment service base URL (default: offline lexical scorer)");
  align_cmd->add_option("--threshold", ao.threshold, "Lexical scorer entailment threshold")
      ->capture_default_str();
  align_cmd->add_option("--max-in-flight", ao.max_in_flight, "Concurrent scorer calls")->capture_default_str();
  align_cmd->add_option("--timeout-ms", ao.timeout_ms, "Remote scorer timeout")->capture_default_str();
  align_cmd->add_flag("--synth-translator", ao.synth_translator,
                      "Translate toy-language sentences into --fact-language before stage 1");
  align_cmd->add_option("--fact-language", ao.fact_language, "Language of the fact fields")
      ->capture_default_str();

  TrainOptions to;
  auto* train_cmd = app.add_subcommand("train", "Train a model and write a checkpoint");
  train_cmd->add_option("--config", to.config, "Run config JSON; its values override flags");
  train_cmd->add_option("--train", to.train, "Training corpus JSONL");
  train_cmd->add_option("--pretrain-corpus", to.pretrain_corpus, "Pretraining corpus (default: training corpus)");
  train_cmd->add_option("--translation-pairs", to.translation_pairs,
                        "JSONL of {language, source, target} for translation pretraining");
  train_cmd->add_option("--setup", to.setup, "multilingual | bilingual:<lang> | translate_input | translate_output")
      ->capture_default_str();
  train_cmd->add_option("--pretrain", to.pretrain, "none | english_only | multilingual | multi_stage | multi_task")
      ->capture_default_str();
  train_cmd->add_option("--checkpoint", to.checkpoint, "Checkpoint output path")->capture_default_str();
  train_cmd->add_option("--history", to.history, "Loss history CSV path")->capture_default_str();
  train_cmd->add_option("--vocab-out", to.vocab_out, "Also write the vocabulary, one token per line");
  train_cmd->add_option("--english-language", to.english_language, "Tag whose references count as English")
      ->capture_default_str();
  train_cmd->add_flag("--synth-translator", to.synth_translator, "Use the exact toy-language translator");
  train_cmd->add_option("--vocab-max", to.vocab_max, "Maximum vocabulary size")->capture_default_str();
  train_cmd->add_option("--lr", to.train_cfg.learning_rate, "Learning rate")->capture_default_str();
  train_cmd->add_option("--weight-decay", to.train_cfg.weight_decay, "Decoupled weight decay")->capture_default_str();
  train_cmd->add_option("--batch-size", to.train_cfg.batch_size, "Batch size")->capture_default_str();
  train_cmd->add_option("--dropout", to.train_cfg.dropout, "Dropout rate")->capture_default_str();
  train_cmd->add_option("--epochs", to.train_cfg.epochs_finetune, "Finetuning epochs")->capture_default_str();
  train_cmd->add_option("--pretrain-epochs", to.train_cfg.epochs_pretrain, "Epochs per pretraining phase")
      ->capture_default_str();
  train_cmd->add_option("--seed", to.train_cfg.seed, "Seed for init, shuffling and dropout")->capture_default_str();
  train_cmd->add_option("--d-model", to.model.d_model, "Model width")->capture_default_str();
  train_cmd->add_option("--heads", to.model.n_heads, "Attention heads")->capture_default_str();
  train_cmd->add_option("--enc-layers", to.model.n_enc_layers, "Encoder layers")->capture_default_str();
  train_cmd->add_option("--dec-layers", to.model.n_dec_layers, "Decoder layers")->capture_default_str();
  train_cmd->add_option("--d-ff", to.model.d_ff, "Feed-forward width")->capture_default_str();
  train_cmd->add_option("--max-positions", to.model.max_positions, "Longest sequence")->capture_default_str();
  train_cmd->add_flag("--no-roles", to.no_roles, "Disable fact-aware role embeddings");
  train_cmd->add_flag("--tie-output", to.tie_output, "Reuse the token embedding as output projection");
  train_cmd->add_flag("--quiet", to.quiet, "Do not print per-epoch losses");

  GenerateOptions go;
  auto* gen_cmd = app.add_subcommand("generate", "Decode a corpus into predictions JSONL");
  gen_cmd->add_option("--checkpoint", go.checkpoint, "Checkpoint written by train")->required();
  gen_cmd->add_option("--corpus", go.corpus, "Corpus JSONL")->required();
  gen_cmd->add_option("--out", go.out, "Output path ('-' for stdout)")->capture_default_str();
  gen_cmd->add_option("--setup", go.setup, "Setup the checkpoint was trained with")->capture_default_str();
  gen_cmd->add_option("--english-language", go.english_language, "Tag whose references count as English")
      ->capture_default_str();
  gen_cmd->add_flag("--synth-translator", go.synth_translator, "Use the exact toy-language translator");
  gen_cmd->add_option("--beam", go.beam, "Beam width")->capture_default_str();
  gen_cmd->add_option("--max-len", go.max_len, "Maximum output length")->capture_default_str();
  gen_cmd->add_option("--length-norm", go.length_norm, "Length normalization exponent")->capture_default_str();

  EvaluateOptions eo;
  auto* eval_cmd = app.add_subcommand("evaluate", "Score predictions (BLEU, METEOR-lite, chrF++)");
  eval_cmd->add_option("predictions", eo.predictions, "Predictions JSONL")->required();
  eval_cmd->add_option("--out", eo.out, "Also write the JSON report here");
  eval_cmd->add_flag("--json", eo.json, "Print JSON instead of a table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kExitOk;
    }
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (*synth_cmd) run_synth(so, out);
    else if (*stats_cmd) run_stats(st, out);
    else if (*lin_cmd) run_linearize(lo, out);
    else if (*align_cmd) run_align(ao, out);
    else if (*train_cmd) run_train(to, out);
    else if (*gen_cmd) run_generate(go, out);
    else if (*eval_cmd) run_evaluate(eo, out);
  } catch (const UsageError& e) {
    err << "xf2t: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "xf2t: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}

}  // namespace xf2t::cli
