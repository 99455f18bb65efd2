#include "mhscreen/experiment.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <memory>
#include <nlohmann/json.hpp>
#include <numeric>
#include <unordered_map>

#include "io_util.hpp"
#include "mhscreen/encoder_interface.hpp"
#include "mhscreen/error.hpp"
#include "mhscreen/preprocess.hpp"
#include "mhscreen/report.hpp"

namespace mhscreen {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::kConfig: return "config";
    case Stage::kIngest: return "ingest";
    case Stage::kPreprocess: return "preprocess";
    case Stage::kFeature: return "feature";
    case Stage::kTrain: return "train";
    case Stage::kEvaluate: return "evaluate";
  }
  return "unknown";
}

int exit_code(Stage stage) { return 2 + static_cast<int>(stage); }

StageError::StageError(Stage stage, const std::string& message)
    : std::runtime_error(std::string(to_string(stage)) + " stage failed: " + message),
      stage_(stage) {}

std::string_view to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::kWordBigram: return "word_bigram";
    case FeatureKind::kChar4gram: return "char_4gram";
    case FeatureKind::kEmbeddings: return "embeddings";
    case FeatureKind::kScores: return "scores";
  }
  return "unknown";
}

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kLogistic: return "logistic";
    case ModelKind::kMlp: return "mlp";
    case ModelKind::kEmbeddingHead: return "embedding_head";
    case ModelKind::kExternalScores: return "external_scores";
  }
  return "unknown";
}

FeatureKind parse_feature_kind(std::string_view text) {
  for (auto k : {FeatureKind::kWordBigram, FeatureKind::kChar4gram, FeatureKind::kEmbeddings,
                 FeatureKind::kScores}) {
    if (to_string(k) == text) return k;
  }
  throw Error(ErrorCode::kConfiguration, "unknown feature '" + std::string(text) + "'");
}

ModelKind parse_model_kind(std::string_view text) {
  for (auto k : {ModelKind::kLogistic, ModelKind::kMlp, ModelKind::kEmbeddingHead,
                 ModelKind::kExternalScores}) {
    if (to_string(k) == text) return k;
  }
  throw Error(ErrorCode::kConfiguration, "unknown model '" + std::string(text) + "'");
}

namespace {

bool is_ngram(FeatureKind kind) {
  return kind == FeatureKind::kWordBigram || kind == FeatureKind::kChar4gram;
}

void check_pairing(FeatureKind feature, ModelKind model) {
  const bool ok = is_ngram(feature)
                      ? (model == ModelKind::kLogistic || model == ModelKind::kMlp)
                      : (feature == FeatureKind::kEmbeddings ? model == ModelKind::kEmbeddingHead
                                                             : model == ModelKind::kExternalScores);
  if (!ok) {
    throw Error(ErrorCode::kConfiguration,
                "feature '" + std::string(to_string(feature)) + "' cannot be used with model '" +
                    std::string(to_string(model)) +
                    "' (scores need external_scores, embeddings need embedding_head, n-grams "
                    "need logistic or mlp)");
  }
}

// Runs fn, turning any library error into a StageError for `stage`.
template <typename Fn>
decltype(auto) in_stage(Stage stage, Fn&& fn) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kConfiguration, msg); };
  check_pairing(feature, model);
  if (users.empty()) fail("a users file is required");
  if (source == Source::kTweetsMerged && !tweets) {
    fail("source tweets_merged needs a tweets file");
  }
  if (feature == FeatureKind::kEmbeddings && !embeddings) {
    fail("feature embeddings needs an embeddings file");
  }
  if (feature == FeatureKind::kScores && !scores) fail("feature scores needs a scores file");
  if (folds < 2) fail("folds must be >= 2");
  if (!(threshold > 0.0 && threshold < 1.0)) fail("threshold must lie in (0, 1)");
  if (hidden_units < 1) fail("hidden units must be >= 1");
  if (min_df && *min_df < 1) fail("min_df must be >= 1");
  if (workers < 1) fail("workers must be >= 1");
  split.validate();
  resolved_train_config().validate();
}

void ExperimentConfig::check_inputs() const {
  auto require = [](const fs::path& p, std::string_view what) {
    if (!fs::is_regular_file(p)) {
      throw Error(ErrorCode::kConfiguration,
                  std::string(what) + " file not found: " + p.string());
    }
  };
  require(users, "users");
  if (tweets) require(*tweets, "tweets");
  if (feature == FeatureKind::kEmbeddings) require(*embeddings, "embeddings");
  if (feature == FeatureKind::kScores) require(*scores, "scores");
}

TrainConfig ExperimentConfig::resolved_train_config() const {
  TrainConfig cfg = train;
  cfg.learning_rate =
      learning_rate.value_or(model == ModelKind::kMlp ? kDefaultMlpLearningRate : 0.1);
  return cfg;
}

FeaturizerConfig ExperimentConfig::resolved_featurizer() const {
  FeaturizerConfig f = feature == FeatureKind::kChar4gram ? FeaturizerConfig::char_4grams()
                                                          : FeaturizerConfig::word_bigrams();
  f.min_df = min_df.value_or(source == Source::kTweetsMerged ? 2 : 1);
  f.weighting = weighting;
  return f;
}

std::string sha256_file(const fs::path& path) {
  auto in = detail::open_input(path);
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(),
                                                              &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::kIo, "SHA-256 initialisation failed");
  }
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) {
      EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
  }
  if (in.bad()) throw Error(ErrorCode::kIo, "read failed: " + path.string());
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned i = 0; i < len; ++i) {
    hex.push_back(kHex[digest[i] >> 4]);
    hex.push_back(kHex[digest[i] & 0xf]);
  }
  return hex;
}

namespace {

constexpr int kReportVersion = 1;
constexpr int kManifestVersion = 1;

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

json confusion_json(const ConfusionMatrix& m) {
  return {{"tp", m.tp}, {"fp", m.fp}, {"tn", m.tn}, {"fn", m.fn}};
}

ConfusionMatrix confusion_from(const json& j) {
  return {j.at("tp").get<std::uint64_t>(), j.at("fp").get<std::uint64_t>(),
          j.at("tn").get<std::uint64_t>(), j.at("fn").get<std::uint64_t>()};
}

// Undefined metrics are written as null.
json metrics_json(const Metrics& m) {
  return {{"accuracy", m.accuracy},
          {"precision", optional_json(m.precision)},
          {"recall", optional_json(m.recall)},
          {"f1", optional_json(m.f1)}};
}

Metrics metrics_from(const json& j) {
  return {j.at("accuracy").get<double>(), optional_from(j.at("precision")),
          optional_from(j.at("recall")), optional_from(j.at("f1"))};
}

// The leading point's +infinity threshold is written as null.
json roc_json(const RocCurve& curve) {
  json points = json::array();
  for (const auto& p : curve.points) {
    points.push_back({{"fpr", p.fpr},
                      {"tpr", p.tpr},
                      {"threshold", std::isinf(p.threshold) ? json(nullptr) : json(p.threshold)}});
  }
  return {{"auc", curve.auc}, {"points", std::move(points)}};
}

RocCurve roc_from(const json& j) {
  RocCurve curve;
  curve.auc = j.at("auc").get<double>();
  for (const auto& p : j.at("points")) {
    const json& t = p.at("threshold");
    curve.points.push_back({p.at("fpr").get<double>(), p.at("tpr").get<double>(),
                            t.is_null() ? std::numeric_limits<double>::infinity()
                                        : t.get<double>()});
  }
  return curve;
}

json evaluation_json(const Evaluation& e) {
  return {{"confusion", confusion_json(e.confusion)},
          {"metrics", metrics_json(e.metrics)},
          {"roc", e.roc ? roc_json(*e.roc) : json(nullptr)}};
}

Evaluation evaluation_from(const json& j) {
  Evaluation e;
  e.confusion = confusion_from(j.at("confusion"));
  e.metrics = metrics_from(j.at("metrics"));
  if (!j.at("roc").is_null()) e.roc = roc_from(j.at("roc"));
  return e;
}

json cv_json(const CvReport& cv, bool full_dataset) {
  json folds = json::array();
  for (const auto& f : cv.per_fold) {
    json entry = {{"fold", f.fold},
                  {"valid", f.valid},
                  {"train_size", f.train_size},
                  {"test_size", f.test_size}};
    if (f.valid) {
      entry["confusion"] = confusion_json(f.confusion);
      entry["metrics"] = metrics_json(f.metrics);
      entry["auc"] = optional_json(f.auc);
    } else {
      entry["error"] = f.error;
    }
    folds.push_back(std::move(entry));
  }
  json aggregate = json::object();
  for (const char* key : {"accuracy", "precision", "recall", "f1", "auc"}) {
    auto it = cv.aggregate.find(key);
    aggregate[key] = it == cv.aggregate.end()
                         ? json(nullptr)
                         : json{{"mean", it->second.mean},
                                {"std", it->second.stddev},
                                {"count", it->second.count}};
  }
  return {{"k", cv.k},
          {"seed", cv.seed},
          {"threshold", cv.threshold},
          {"stratified", cv.stratified},
          {"scope", full_dataset ? "full_dataset" : "training_split"},
          {"valid_folds", cv.valid_folds()},
          {"per_fold", std::move(folds)},
          {"aggregate", std::move(aggregate)},
          {"pooled_confusion", confusion_json(cv.pooled_confusion)},
          {"pooled_roc", cv.pooled_roc ? roc_json(*cv.pooled_roc) : json(nullptr)}};
}

CvReport cv_from(const json& j) {
  CvReport cv;
  cv.k = j.at("k").get<std::size_t>();
  cv.seed = j.at("seed").get<std::uint64_t>();
  cv.threshold = j.at("threshold").get<double>();
  cv.stratified = j.at("stratified").get<bool>();
  for (const auto& f : j.at("per_fold")) {
    FoldResult r;
    r.fold = f.at("fold").get<std::size_t>();
    r.valid = f.at("valid").get<bool>();
    r.train_size = f.at("train_size").get<std::size_t>();
    r.test_size = f.at("test_size").get<std::size_t>();
    if (r.valid) {
      r.confusion = confusion_from(f.at("confusion"));
      r.metrics = metrics_from(f.at("metrics"));
      r.auc = optional_from(f.at("auc"));
    } else {
      r.error = f.value("error", "");
    }
    cv.per_fold.push_back(std::move(r));
  }
  for (const auto& [key, value] : j.at("aggregate").items()) {
    if (value.is_null()) continue;
    cv.aggregate[key] = {value.at("mean").get<double>(), value.at("std").get<double>(),
                         value.at("count").get<std::size_t>()};
  }
  cv.pooled_confusion = confusion_from(j.at("pooled_confusion"));
  if (!j.at("pooled_roc").is_null()) cv.pooled_roc = roc_from(j.at("pooled_roc"));
  return cv;
}

json counts_json(const CorpusCounts& c) {
  return {{"users", c.users},
          {"documents_in", c.documents_in},
          {"omitted_users", c.omitted_users},
          {"dropped_skipped", c.dropped_skipped},
          {"dropped_emptied", c.dropped_emptied},
          {"dropped_below_min_chars", c.dropped_below_min_chars},
          {"unmatched_documents", c.unmatched_documents},
          {"unmatched_entries", c.unmatched_entries},
          {"used", c.used},
          {"cv_documents", c.cv_documents},
          {"held_out_documents", c.held_out_documents}};
}

// Everything that influences the numbers, with per-model defaults resolved.
json settings_json(const ExperimentConfig& c) {
  const TrainConfig t = c.resolved_train_config();
  const FeaturizerConfig f = c.resolved_featurizer();
  return {{"format", to_string(c.format)},
          {"source", to_string(c.source)},
          {"feature", to_string(c.feature)},
          {"model", to_string(c.model)},
          {"split",
           {{"train_fraction", c.split.train_fraction},
            {"seed", c.split.seed},
            {"stratified", c.split.stratified}}},
          {"train",
           {{"epochs", t.epochs},
            {"learning_rate", t.learning_rate},
            {"batch_size", t.batch_size},
            {"l2_penalty", t.l2_penalty},
            {"seed", t.seed}}},
          {"hidden_units", c.hidden_units},
          {"weighting", to_string(c.weighting)},
          {"min_df", f.min_df},
          {"folds", c.folds},
          {"threshold", c.threshold},
          {"cv_full", c.cv_full}};
}

struct InputFile {
  std::string role;
  fs::path path;
};

std::vector<InputFile> input_files(const ExperimentConfig& c) {
  std::vector<InputFile> out{{"users", c.users}};
  if (c.tweets) out.push_back({"tweets", *c.tweets});
  if (c.feature == FeatureKind::kEmbeddings) out.push_back({"embeddings", *c.embeddings});
  if (c.feature == FeatureKind::kScores) out.push_back({"scores", *c.scores});
  return out;
}

void write_plots(const fs::path& dir, std::string_view prefix, const ConfusionMatrix& m,
                 const std::optional<RocCurve>& roc, bool svg, std::string_view title) {
  const std::string p(prefix);
  write_text_file(dir / (p + "confusion.csv"), confusion_csv(m));
  if (roc) write_text_file(dir / (p + "roc.csv"), roc_csv(*roc));
  if (!svg) return;
  write_text_file(dir / (p + "confusion.svg"), confusion_svg(m, std::string(title)));
  if (roc) write_text_file(dir / (p + "roc.svg"), roc_svg(*roc, std::string(title)));
}

std::vector<const CleanDocument*> kept_documents(std::span<const CleanDocument> clean) {
  std::vector<const CleanDocument*> kept;
  for (const auto& d : clean) {
    if (!d.dropped()) kept.push_back(&d);
  }
  return kept;
}

std::vector<double> to_double(const std::vector<float>& v) {
  return std::vector<double>(v.begin(), v.end());
}

// The working set of an experiment: kept documents plus, for external
// features, the aligned embedding or score per document.
struct Items {
  std::vector<const CleanDocument*> docs;
  std::vector<Label> labels;
  std::vector<std::vector<double>> dense;
  std::vector<double> scores;

  std::size_t size() const { return docs.size(); }
};

std::vector<CleanDocument> gather(const Items& items, std::span<const std::size_t> idx) {
  std::vector<CleanDocument> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(*items.docs[i]);
  return out;
}

std::vector<SparseSample> sparse_samples(const Items& items, std::span<const std::size_t> idx,
                                         const Vocabulary& vocab, const FeaturizerConfig& f) {
  std::vector<SparseSample> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back({vectorize(*items.docs[i], vocab, f), items.labels[i]});
  return out;
}

std::vector<DenseSample> dense_samples(const Items& items, std::span<const std::size_t> idx) {
  std::vector<DenseSample> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back({items.dense[i], items.labels[i]});
  return out;
}

struct Fitted {
  std::optional<Classifier> model;
  std::optional<Vocabulary> vocabulary;
};

// Fits on `train` and scores `test`. When `stages` is set, featurization and
// training failures are reported as their own stages.
std::vector<double> fit_and_score(const ExperimentConfig& cfg, const Items& items,
                                  std::span<const std::size_t> train,
                                  std::span<const std::size_t> test, bool stages,
                                  Fitted* fitted = nullptr) {
  auto step = [&](Stage stage, auto&& fn) -> decltype(auto) {
    return stages ? in_stage(stage, fn) : fn();
  };
  const TrainConfig tc = cfg.resolved_train_config();
  std::vector<double> scores;
  scores.reserve(test.size());
  switch (cfg.model) {
    case ModelKind::kLogistic:
    case ModelKind::kMlp: {
      const FeaturizerConfig f = cfg.resolved_featurizer();
      auto vocab = step(Stage::kFeature, [&] {
        const auto docs = gather(items, train);
        return build_vocabulary(docs, f);
      });
      auto train_set = step(Stage::kFeature, [&] { return sparse_samples(items, train, vocab, f); });
      Classifier model = step(Stage::kTrain, [&]() -> Classifier {
        if (cfg.model == ModelKind::kLogistic) return train_logistic(train_set, tc);
        return train_mlp(train_set, cfg.hidden_units, tc);
      });
      for (const auto& s : sparse_samples(items, test, vocab, f)) {
        scores.push_back(std::visit(
            [&](const auto& m) -> double {
              if constexpr (std::is_same_v<std::decay_t<decltype(m)>, EmbeddingHead>) {
                return 0.0;
              } else {
                return m.predict_proba(s.features);
              }
            },
            model));
      }
      if (fitted) {
        fitted->model = std::move(model);
        fitted->vocabulary = std::move(vocab);
      }
      break;
    }
    case ModelKind::kEmbeddingHead: {
      const auto train_set = dense_samples(items, train);
      auto head = step(Stage::kTrain, [&] { return train_embedding_head(train_set, tc); });
      for (std::size_t i : test) scores.push_back(head.predict_proba(items.dense[i]));
      if (fitted) fitted->model = std::move(head);
      break;
    }
    case ModelKind::kExternalScores:
      for (std::size_t i : test) scores.push_back(items.scores[i]);
      break;
  }
  return scores;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  in_stage(Stage::kConfig, [&] {
    config.validate();
    config.check_inputs();
  });

  ExperimentResult result;
  CorpusCounts& counts = result.counts;

  // Ingest.
  json inputs = json::object();
  auto dataset = in_stage(Stage::kIngest, [&] {
    for (const auto& f : input_files(config)) {
      inputs[f.role] = {{"path", fs::absolute(f.path).lexically_normal().string()},
                        {"sha256", sha256_file(f.path)}};
    }
    const auto users = load_users(config.users, config.tweets, config.format);
    counts.users = users.size();
    return build_documents(users, config.source);
  });
  counts.documents_in = dataset.size();
  counts.omitted_users = dataset.omitted_users();
  if (dataset.empty()) {
    throw StageError(Stage::kIngest, "no user has a " + std::string(to_string(config.source)) +
                                         " document");
  }

  // Preprocess.
  const auto clean = in_stage(Stage::kPreprocess, [&] {
    return Preprocessor().process_all(dataset.documents(), config.workers);
  });
  for (const auto& d : clean) {
    if (d.drop_reason == DropReason::kSkipped) ++counts.dropped_skipped;
    if (d.drop_reason == DropReason::kEmptied) ++counts.dropped_emptied;
    if (d.drop_reason == DropReason::kBelowMinChars) ++counts.dropped_below_min_chars;
  }
  const auto kept = kept_documents(clean);
  if (kept.empty()) {
    throw StageError(Stage::kPreprocess, "every document was dropped during preprocessing");
  }

  // Feature inputs. External files are aligned to the kept documents.
  Items items;
  in_stage(Stage::kFeature, [&] {
    std::vector<CleanDocument> kept_docs;
    for (const auto* d : kept) kept_docs.push_back(*d);
    const std::span<const CleanDocument> view(kept_docs);
    auto add = [&](std::size_t k) {
      items.docs.push_back(kept[k]);
      items.labels.push_back(kept[k]->label);
    };
    if (config.feature == FeatureKind::kEmbeddings) {
      const auto aligned = align(view, load_embeddings(*config.embeddings).entries);
      for (const auto& [k, vec] : aligned.pairs) {
        add(k);
        items.dense.push_back(to_double(vec));
      }
      counts.unmatched_documents = aligned.unmatched_documents;
      counts.unmatched_entries = aligned.unmatched_entries;
    } else if (config.feature == FeatureKind::kScores) {
      const auto aligned = align(view, load_scores(*config.scores).entries);
      for (const auto& [k, p] : aligned.pairs) {
        add(k);
        items.scores.push_back(p);
      }
      counts.unmatched_documents = aligned.unmatched_documents;
      counts.unmatched_entries = aligned.unmatched_entries;
    } else {
      for (std::size_t k = 0; k < kept.size(); ++k) add(k);
    }
  });
  counts.used = items.size();

  // Split. Index lists refer to `items`.
  std::vector<std::size_t> cv_idx, held_idx;
  if (config.cv_full) {
    cv_idx.resize(items.size());
    std::iota(cv_idx.begin(), cv_idx.end(), std::size_t{0});
  } else {
    in_stage(Stage::kTrain, [&] {
      std::vector<Document> docs;
      std::unordered_map<std::string, std::size_t> position;
      for (std::size_t i = 0; i < items.size(); ++i) {
        docs.push_back({items.docs[i]->user_id, items.labels[i], items.docs[i]->source,
                        items.docs[i]->joined()});
        position.emplace(items.docs[i]->user_id, i);
      }
      const Dataset working(dataset.source(), std::move(docs));
      const auto [train, test] = train_test_split(working, config.split);
      for (const auto& d : train.documents()) cv_idx.push_back(position.at(d.user_id));
      for (const auto& d : test.documents()) held_idx.push_back(position.at(d.user_id));
    });
  }
  counts.cv_documents = cv_idx.size();
  counts.held_out_documents = held_idx.size();

  // Cross-validation. Fold indices refer to cv_idx.
  std::vector<Label> cv_labels;
  for (std::size_t i : cv_idx) cv_labels.push_back(items.labels[i]);
  const FoldTrainer trainer = [&](std::span<const std::size_t> train,
                                  std::span<const std::size_t> test) {
    std::vector<std::size_t> tr, te;
    for (std::size_t i : train) tr.push_back(cv_idx[i]);
    for (std::size_t i : test) te.push_back(cv_idx[i]);
    return fit_and_score(config, items, tr, te, false);
  };
  CvOptions options;
  options.k = config.folds;
  options.seed = config.split.seed;
  options.stratified = config.split.stratified;
  options.threshold = config.threshold;
  options.workers = config.workers;
  result.cv = in_stage(Stage::kEvaluate, [&] { return cross_validate(cv_labels, trainer, options); });
  if (result.cv.valid_folds() == 0) {
    const auto& first = result.cv.per_fold.front();
    throw StageError(Stage::kTrain, "no fold could be trained (fold 0: " + first.error + ")");
  }

  // Final model on the training split, scored on the held-out split.
  Fitted fitted;
  if (!held_idx.empty()) {
    const auto scores = fit_and_score(config, items, cv_idx, held_idx, true, &fitted);
    std::vector<Label> held_labels;
    for (std::size_t i : held_idx) held_labels.push_back(items.labels[i]);
    result.held_out =
        in_stage(Stage::kEvaluate, [&] { return evaluate_scores(scores, held_labels, config.threshold); });
  } else if (config.model != ModelKind::kExternalScores) {
    fit_and_score(config, items, cv_idx, {}, true, &fitted);
  }

  // Report.
  in_stage(Stage::kEvaluate, [&] {
    const fs::path& out = config.out_dir;
    json report = {{"format", "mhscreen-report"},
                   {"version", kReportVersion},
                   {"kind", "experiment"},
                   {"generated_at", utc_timestamp()},
                   {"settings", settings_json(config)},
                   {"seeds",
                    {{"split", config.split.seed},
                     {"folds", config.split.seed},
                     {"train", config.train.seed}}},
                   {"input_sha256", json::object()},
                   {"counts", counts_json(counts)},
                   {"cv", cv_json(result.cv, config.cv_full)},
                   {"held_out", result.held_out ? evaluation_json(*result.held_out) : json(nullptr)}};
    for (const auto& [role, entry] : inputs.items()) {
      report["input_sha256"][role] = entry.at("sha256");
    }
    result.report_json = report.dump(2) + "\n";
    write_text_file(out / "report.json", result.report_json);
    write_plots(out, "", result.cv.pooled_confusion, result.cv.pooled_roc, config.svg,
                "Cross-validation, pooled over folds");
    if (result.held_out) {
      write_plots(out, "held_out_", result.held_out->confusion, result.held_out->roc, config.svg,
                  "Held-out split");
    }
    if (fitted.model) {
      ModelFile file{*fitted.model, config.resolved_train_config(), std::nullopt,
                     std::move(fitted.vocabulary)};
      if (is_ngram(config.feature)) file.featurizer = config.resolved_featurizer();
      save_model(out / "model.json", file);
    }

    json settings = settings_json(config);
    json manifest = {{"format", "mhscreen-manifest"},
                     {"version", kManifestVersion},
                     {"settings", settings},
                     {"inputs", inputs},
                     {"out_dir", fs::absolute(out).lexically_normal().string()},
                     {"workers", config.workers},
                     {"svg", config.svg},
                     {"counts", counts_json(counts)}};
    write_text_file(out / "manifest.json", manifest.dump(2) + "\n");
  });
  return result;
}

ExperimentConfig config_from_manifest(const fs::path& manifest_path) {
  json m;
  try {
    m = json::parse(read_text_file(manifest_path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, manifest_path.string() + ": " + e.what());
  }
  try {
    if (m.value("format", "") != "mhscreen-manifest") {
      throw Error(ErrorCode::kParse, manifest_path.string() + ": not a manifest file");
    }
    if (m.at("version").get<int>() != kManifestVersion) {
      throw Error(ErrorCode::kVersion, manifest_path.string() + ": unsupported manifest version");
    }
    const json& s = m.at("settings");
    ExperimentConfig c;
    c.format = parse_input_format(s.at("format").get<std::string>());
    c.source = parse_source(s.at("source").get<std::string>());
    c.feature = parse_feature_kind(s.at("feature").get<std::string>());
    c.model = parse_model_kind(s.at("model").get<std::string>());
    c.split.train_fraction = s.at("split").at("train_fraction").get<double>();
    c.split.seed = s.at("split").at("seed").get<std::uint64_t>();
    c.split.stratified = s.at("split").at("stratified").get<bool>();
    const json& t = s.at("train");
    c.train.epochs = t.at("epochs").get<std::size_t>();
    c.train.learning_rate = t.at("learning_rate").get<double>();
    c.learning_rate = c.train.learning_rate;
    c.train.batch_size = t.at("batch_size").get<std::size_t>();
    c.train.l2_penalty = t.at("l2_penalty").get<double>();
    c.train.seed = t.at("seed").get<std::uint64_t>();
    c.hidden_units = s.at("hidden_units").get<std::size_t>();
    c.weighting = parse_weighting(s.at("weighting").get<std::string>());
    c.min_df = s.at("min_df").get<std::size_t>();
    c.folds = s.at("folds").get<std::size_t>();
    c.threshold = s.at("threshold").get<double>();
    c.cv_full = s.at("cv_full").get<bool>();
    c.out_dir = m.at("out_dir").get<std::string>();
    c.workers = m.value("workers", 1u);
    c.svg = m.value("svg", true);

    for (const auto& [role, entry] : m.at("inputs").items()) {
      const fs::path path = entry.at("path").get<std::string>();
      if (role == "users") {
        c.users = path;
      } else if (role == "tweets") {
        c.tweets = path;
      } else if (role == "embeddings") {
        c.embeddings = path;
      } else if (role == "scores") {
        c.scores = path;
      } else {
        throw Error(ErrorCode::kParse, "unknown input role '" + role + "'");
      }
      if (!fs::is_regular_file(path)) {
        throw Error(ErrorCode::kConfiguration, role + " input no longer exists: " + path.string());
      }
      const std::string expected = entry.at("sha256").get<std::string>();
      if (sha256_file(path) != expected) {
        throw Error(ErrorCode::kConfiguration,
                    role + " input changed since the manifest was written: " + path.string());
      }
    }
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, manifest_path.string() + ": " + e.what());
  }
}

IngestSummary ingest_stage(const fs::path& users, const std::optional<fs::path>& tweets,
                           InputFormat format, Source source, const fs::path& out_documents) {
  return in_stage(Stage::kIngest, [&] {
    const auto records = load_users(users, tweets, format);
    IngestSummary s;
    s.users = records.size();
    for (const auto& r : records) {
      s.tweets += r.tweets.size();
      if (r.bio) ++s.bios;
    }
    const Dataset dataset = build_documents(records, source);
    s.documents = dataset.size();
    s.omitted_users = dataset.omitted_users();
    write_documents_jsonl(out_documents, dataset.documents());
    return s;
  });
}

PreprocessSummary preprocess_stage(const fs::path& documents, const fs::path& out_clean,
                                   unsigned workers) {
  const auto docs = in_stage(Stage::kIngest, [&] { return read_documents_jsonl(documents); });
  return in_stage(Stage::kPreprocess, [&] {
    const auto clean = Preprocessor().process_all(docs, workers);
    PreprocessSummary s;
    s.documents = clean.size();
    for (const auto& d : clean) {
      switch (d.drop_reason) {
        case DropReason::kNone: ++s.kept; break;
        case DropReason::kSkipped: ++s.skipped; break;
        case DropReason::kEmptied: ++s.emptied; break;
        case DropReason::kBelowMinChars: ++s.below_min_chars; break;
      }
    }
    write_clean_jsonl(out_clean, clean);
    return s;
  });
}

namespace {

std::vector<CleanDocument> read_kept(const fs::path& clean) {
  auto docs = in_stage(Stage::kPreprocess, [&] { return read_clean_jsonl(clean); });
  std::erase_if(docs, [](const CleanDocument& d) { return d.dropped(); });
  if (docs.empty()) {
    throw StageError(Stage::kPreprocess, clean.string() + ": no kept documents");
  }
  return docs;
}

}  // namespace

FeaturizeSummary featurize_stage(const fs::path& clean, const FeaturizerConfig& featurizer,
                                 const fs::path& out_dir) {
  const auto docs = read_kept(clean);
  return in_stage(Stage::kFeature, [&] {
    const Vocabulary vocab = build_vocabulary(docs, featurizer);
    std::vector<std::string> ids;
    std::vector<FeatureVector> vectors;
    FeaturizeSummary s;
    for (const auto& d : docs) {
      ids.push_back(d.user_id);
      vectors.push_back(vectorize(d, vocab, featurizer));
      s.nonzeros += vectors.back().entries.size();
    }
    s.documents = docs.size();
    s.vocabulary_size = vocab.size();
    write_vocabulary(out_dir / "vocabulary.tsv", vocab);
    write_sparse_triplets(out_dir / "vectors.csv", ids, vectors);
    return s;
  });
}

void train_stage(const TrainRequest& request) {
  in_stage(Stage::kConfig, [&] {
    check_pairing(request.feature, request.model);
    if (request.model == ModelKind::kExternalScores) {
      throw Error(ErrorCode::kConfiguration, "external scores are not trained; use evaluate");
    }
    if (request.feature == FeatureKind::kEmbeddings && !request.embeddings) {
      throw Error(ErrorCode::kConfiguration, "embedding_head training needs --embeddings");
    }
    request.train.validate();
    request.featurizer.validate();
  });
  const auto docs = read_kept(request.clean);
  ModelFile file{LogisticModel{}, request.train, std::nullopt, std::nullopt};
  if (request.feature == FeatureKind::kEmbeddings) {
    const auto samples = in_stage(Stage::kFeature, [&] {
      const auto set = load_embeddings(*request.embeddings);
      std::vector<DenseSample> out;
      for (auto& [k, vec] : align(std::span<const CleanDocument>(docs), set.entries).pairs) {
        out.push_back({to_double(vec), docs[k].label});
      }
      return out;
    });
    file.model = in_stage(Stage::kTrain, [&] { return train_embedding_head(samples, request.train); });
  } else {
    Vocabulary vocab =
        in_stage(Stage::kFeature, [&] { return build_vocabulary(docs, request.featurizer); });
    std::vector<SparseSample> samples;
    for (const auto& d : docs) samples.push_back({vectorize(d, vocab, request.featurizer), d.label});
    file.model = in_stage(Stage::kTrain, [&]() -> Classifier {
      if (request.model == ModelKind::kLogistic) return train_logistic(samples, request.train);
      return train_mlp(samples, request.hidden_units, request.train);
    });
    file.featurizer = request.featurizer;
    file.vocabulary = std::move(vocab);
  }
  in_stage(Stage::kTrain, [&] { save_model(request.out_model, file); });
}

Evaluation evaluate_stage(const EvaluateRequest& request) {
  in_stage(Stage::kConfig, [&] {
    if (!(request.threshold > 0.0 && request.threshold < 1.0)) {
      throw Error(ErrorCode::kConfiguration, "threshold must lie in (0, 1)");
    }
    if (static_cast<bool>(request.model) == static_cast<bool>(request.scores)) {
      throw Error(ErrorCode::kConfiguration, "evaluate needs exactly one of --model or --scores");
    }
  });
  const auto docs = read_kept(request.clean);
  std::vector<double> scores;
  std::vector<Label> labels;
  std::size_t unmatched_documents = 0, unmatched_entries = 0;
  std::string scored_by;

  in_stage(Stage::kEvaluate, [&] {
    if (request.scores) {
      const auto set = load_scores(*request.scores);
      const auto aligned = align(std::span<const CleanDocument>(docs), set.entries);
      for (const auto& [k, p] : aligned.pairs) {
        scores.push_back(p);
        labels.push_back(docs[k].label);
      }
      unmatched_documents = aligned.unmatched_documents;
      unmatched_entries = aligned.unmatched_entries;
      scored_by = set.model_name;
      return;
    }
    const ModelFile file = load_model(*request.model);
    scored_by = model_kind_name(file.model);
    if (const auto* head = std::get_if<EmbeddingHead>(&file.model)) {
      if (!request.embeddings) {
        throw Error(ErrorCode::kConfiguration, "an embedding_head model needs --embeddings");
      }
      const auto set = load_embeddings(*request.embeddings);
      if (set.dim != head->embedding_dim()) {
        throw Error(ErrorCode::kDimensionMismatch, "embedding dim " + std::to_string(set.dim) +
                                                       " does not match the model's " +
                                                       std::to_string(head->embedding_dim()));
      }
      const auto aligned = align(std::span<const CleanDocument>(docs), set.entries);
      for (const auto& [k, vec] : aligned.pairs) {
        scores.push_back(head->predict_proba(to_double(vec)));
        labels.push_back(docs[k].label);
      }
      unmatched_documents = aligned.unmatched_documents;
      unmatched_entries = aligned.unmatched_entries;
      return;
    }
    if (!file.featurizer || !file.vocabulary) {
      throw Error(ErrorCode::kParse, "model file lacks its featurizer and vocabulary");
    }
    for (const auto& d : docs) {
      const FeatureVector x = vectorize(d, *file.vocabulary, *file.featurizer);
      scores.push_back(std::visit(
          [&](const auto& m) -> double {
            if constexpr (std::is_same_v<std::decay_t<decltype(m)>, EmbeddingHead>) {
              return 0.0;
            } else {
              return m.predict_proba(x);
            }
          },
          file.model));
      labels.push_back(d.label);
    }
  });

  return in_stage(Stage::kEvaluate, [&] {
    Evaluation e = evaluate_scores(scores, labels, request.threshold);
    json report = {{"format", "mhscreen-report"},
                   {"version", kReportVersion},
                   {"kind", "evaluation"},
                   {"generated_at", utc_timestamp()},
                   {"scored_by", scored_by},
                   {"threshold", request.threshold},
                   {"counts",
                    {{"documents", docs.size()},
                     {"scored", scores.size()},
                     {"unmatched_documents", unmatched_documents},
                     {"unmatched_entries", unmatched_entries}}},
                   {"evaluation", evaluation_json(e)}};
    write_text_file(request.out_dir / "report.json", report.dump(2) + "\n");
    write_plots(request.out_dir, "", e.confusion, e.roc, request.svg, "Evaluation");
    return e;
  });
}

namespace {

std::string format_evaluation(const Evaluation& e, std::string_view heading) {
  auto fmt = [](const std::optional<double>& v) {
    if (!v) return std::string("undefined");
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, *v, std::chars_format::fixed, 4);
    return std::string(buf, res.ptr);
  };
  std::string out(heading);
  out += "\n  accuracy   " + fmt(e.metrics.accuracy);
  out += "\n  precision  " + fmt(e.metrics.precision);
  out += "\n  recall     " + fmt(e.metrics.recall);
  out += "\n  f1         " + fmt(e.metrics.f1);
  out += "\n  auc        " + fmt(e.roc ? std::optional(e.roc->auc) : std::nullopt);
  out += "\n  confusion  tp=" + std::to_string(e.confusion.tp) +
         " fp=" + std::to_string(e.confusion.fp) + " tn=" + std::to_string(e.confusion.tn) +
         " fn=" + std::to_string(e.confusion.fn) + "\n";
  return out;
}

}  // namespace

std::string report_stage(const fs::path& report_json, const fs::path& out_dir) {
  return in_stage(Stage::kEvaluate, [&] {
    json r;
    try {
      r = json::parse(read_text_file(report_json));
      if (r.value("format", "") != "mhscreen-report") {
        throw Error(ErrorCode::kParse, report_json.string() + ": not a report file");
      }
      if (r.at("version").get<int>() != kReportVersion) {
        throw Error(ErrorCode::kVersion, report_json.string() + ": unsupported report version");
      }
      std::string text;
      if (r.at("kind") == "experiment") {
        const CvReport cv = cv_from(r.at("cv"));
        text = "Cross-validation (" + r.at("cv").at("scope").get<std::string>() + ", k=" +
               std::to_string(cv.k) + ")\n" + format_cv_table(cv);
        Evaluation pooled{cv.pooled_confusion, metrics_from_confusion(cv.pooled_confusion),
                          cv.pooled_roc};
        text += "\n" + format_evaluation(pooled, "Pooled out-of-fold predictions");
        write_plots(out_dir, "", cv.pooled_confusion, cv.pooled_roc, true,
                    "Cross-validation, pooled over folds");
        if (!r.at("held_out").is_null()) {
          const Evaluation held = evaluation_from(r.at("held_out"));
          text += "\n" + format_evaluation(held, "Held-out split");
          write_plots(out_dir, "held_out_", held.confusion, held.roc, true, "Held-out split");
        }
      } else {
        const Evaluation e = evaluation_from(r.at("evaluation"));
        text = format_evaluation(e, "Evaluation");
        write_plots(out_dir, "", e.confusion, e.roc, true, "Evaluation");
      }
      text += "\n" + format_reference_table();
      write_text_file(out_dir / "report.txt", text);
      return text;
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParse, report_json.string() + ": " + e.what());
    }
  });
}

}  // namespace mhscreen
