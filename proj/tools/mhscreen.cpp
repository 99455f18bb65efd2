// mhscreen: command-line front end for the screening pipeline.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "mhscreen/error.hpp"
#include "mhscreen/experiment.hpp"
#include "mhscreen/report.hpp"

namespace fs = std::filesystem;
using namespace mhscreen;

namespace {

Source parse_source_flag(const std::string& text) {
  if (text == "tweets" || text == "tweets_merged") return Source::kTweetsMerged;
  if (text == "bios" || text == "bio") return Source::kBio;
  throw Error(ErrorCode::kConfiguration, "unknown source '" + text + "'");
}

std::optional<fs::path> optional_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return fs::path(s);
}

std::size_t default_min_df(Source source) { return source == Source::kTweetsMerged ? 2 : 1; }

// Flags shared by every subcommand that trains a model.
struct TrainFlags {
  std::size_t epochs = 5;
  std::optional<double> lr;
  std::size_t batch = 32;
  double l2 = 1e-4;
  std::size_t hidden = kDefaultHiddenUnits;
  std::uint64_t seed = 0;

  void add(CLI::App& app) {
    app.add_option("--epochs", epochs, "Training epochs");
    app.add_option("--lr", lr, "Learning rate (default 0.1; 0.05 for mlp)");
    app.add_option("--batch", batch, "Mini-batch size");
    app.add_option("--l2", l2, "L2 penalty on weights");
    app.add_option("--hidden", hidden, "Hidden units for the mlp model");
    app.add_option("--seed", seed, "Seed for splitting, folds, shuffling and initialization");
  }

  TrainConfig config(ModelKind model) const {
    TrainConfig c;
    c.epochs = epochs;
    c.learning_rate = lr.value_or(model == ModelKind::kMlp ? kDefaultMlpLearningRate : 0.1);
    c.batch_size = batch;
    c.l2_penalty = l2;
    c.seed = seed;
    return c;
  }
};

struct FeatureFlags {
  std::string feature = "word_bigram";
  std::string source = "tweets";
  std::string weighting = "tfidf";
  std::optional<std::size_t> min_df;

  void add(CLI::App& app, const std::string& feature_help) {
    app.add_option("--feature", feature, feature_help);
    app.add_option("--source", source,
                   "Document source: tweets (merged per user) or bios; picks the min-df default");
    app.add_option("--weighting", weighting, "N-gram weighting: tfidf or count");
    app.add_option("--min-df", min_df, "Minimum document frequency (default 2 tweets, 1 bios)");
  }

  FeaturizerConfig featurizer() const {
    const FeatureKind kind = parse_feature_kind(feature);
    FeaturizerConfig f = kind == FeatureKind::kChar4gram ? FeaturizerConfig::char_4grams()
                                                         : FeaturizerConfig::word_bigrams();
    f.min_df = min_df.value_or(default_min_df(parse_source_flag(source)));
    f.weighting = parse_weighting(weighting);
    return f;
  }
};

void print_metric(const char* name, const std::optional<double>& v) {
  if (v) {
    std::printf("  %-10s %.4f\n", name, *v);
  } else {
    std::printf("  %-10s undefined\n", name);
  }
}

void print_evaluation(const Evaluation& e, const char* heading) {
  std::printf("%s\n", heading);
  print_metric("accuracy", e.metrics.accuracy);
  print_metric("precision", e.metrics.precision);
  print_metric("recall", e.metrics.recall);
  print_metric("f1", e.metrics.f1);
  print_metric("auc", e.roc ? std::optional(e.roc->auc) : std::nullopt);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Depression-screening text pipeline: ingest, clean, featurize, train, evaluate."};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  app.set_config("--config", "", "INI/TOML file with flag values; command-line flags win");

  const unsigned cores = std::max(1u, std::thread::hardware_concurrency());

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Read users/tweets files and write documents.jsonl");
  std::string users, tweets, format = "csv", source = "tweets", out = "mhscreen-out";
  ingest->add_option("--users", users, "Users file (user_id,label,bio)")->required();
  ingest->add_option("--tweets", tweets, "Tweets file (user_id,text)");
  ingest->add_option("--format", format, "Input format: csv or jsonl");
  ingest->add_option("--source", source, "Document source: tweets or bios");
  ingest->add_option("--out", out, "Output directory");

  // preprocess
  auto* preprocess = app.add_subcommand("preprocess", "Clean documents.jsonl into clean.jsonl");
  std::string documents;
  unsigned workers = cores;
  preprocess->add_option("--documents", documents, "documents.jsonl from ingest")->required();
  preprocess->add_option("--workers", workers, "Worker threads");
  preprocess->add_option("--out", out, "Output directory");

  // featurize
  auto* featurize =
      app.add_subcommand("featurize", "Build the vocabulary and sparse vectors from clean.jsonl");
  std::string clean;
  FeatureFlags feature_flags;
  featurize->add_option("--clean", clean, "clean.jsonl from preprocess")->required();
  feature_flags.add(*featurize, "N-gram kind: word_bigram or char_4gram");
  featurize->add_option("--out", out, "Output directory");

  // train
  auto* train = app.add_subcommand("train", "Train one model on all kept documents");
  std::string model = "logistic", embeddings;
  TrainFlags train_flags;
  FeatureFlags train_features;
  train->add_option("--clean", clean, "clean.jsonl from preprocess")->required();
  train_features.add(*train, "Features: word_bigram, char_4gram or embeddings");
  train->add_option("--model", model, "Model: logistic, mlp or embedding_head");
  train->add_option("--embeddings", embeddings, "Embedding JSONL for embedding_head");
  train_flags.add(*train);
  train->add_option("--out", out, "Output directory (writes model.json)");

  // evaluate
  auto* evaluate =
      app.add_subcommand("evaluate", "Score clean.jsonl with a model file or external scores");
  std::string model_file, scores;
  double threshold = kDecisionThreshold;
  bool no_svg = false;
  evaluate->add_option("--clean", clean, "clean.jsonl from preprocess")->required();
  evaluate->add_option("--model-file", model_file, "model.json from train or run");
  evaluate->add_option("--embeddings", embeddings, "Embedding JSONL for embedding_head models");
  evaluate->add_option("--scores", scores, "Score JSONL with p_diagnosed per user");
  evaluate->add_option("--threshold", threshold, "Decision threshold in (0, 1)");
  evaluate->add_flag("--no-svg", no_svg, "Skip the SVG plots");
  evaluate->add_option("--out", out, "Output directory");

  // run
  auto* run = app.add_subcommand("run", "Full pipeline with cross-validation and reports");
  std::string manifest;
  std::string run_feature = "word_bigram", run_weighting = "tfidf";
  std::optional<std::size_t> run_min_df;
  std::size_t folds = 10;
  double split = 0.8;
  bool no_stratify = false, cv_full = false;
  run->add_option("--manifest", manifest,
                  "Rerun from a manifest.json (other flags except --out and --workers are "
                  "ignored)");
  run->add_option("--users", users, "Users file (user_id,label,bio)");
  run->add_option("--tweets", tweets, "Tweets file (user_id,text)");
  run->add_option("--format", format, "Input format: csv or jsonl");
  run->add_option("--source", source, "Document source: tweets or bios");
  run->add_option("--feature", run_feature,
                  "Features: word_bigram, char_4gram, embeddings or scores");
  run->add_option("--model", model, "Model: logistic, mlp, embedding_head or external_scores");
  run->add_option("--embeddings", embeddings, "Embedding JSONL (feature embeddings)");
  run->add_option("--scores", scores, "Score JSONL (feature scores)");
  run->add_option("--weighting", run_weighting, "N-gram weighting: tfidf or count");
  run->add_option("--min-df", run_min_df, "Minimum document frequency (default 2 tweets, 1 bios)");
  run->add_option("--folds", folds, "Cross-validation folds");
  run->add_option("--split", split, "Training fraction of the train/held-out split");
  run->add_flag("--no-stratify", no_stratify, "Disable stratified splitting and folds");
  run->add_flag("--cv-full", cv_full, "Cross-validate over the whole dataset (no held-out split)");
  run->add_option("--threshold", threshold, "Decision threshold in (0, 1)");
  run->add_option("--workers", workers, "Worker threads");
  run->add_flag("--no-svg", no_svg, "Skip the SVG plots");
  run->add_option("--out", out, "Output directory");
  TrainFlags run_train;
  run_train.add(*run);

  // report
  auto* report = app.add_subcommand("report", "Render tables and plots from a report.json");
  std::string report_path;
  report->add_option("--report", report_path, "report.json from run or evaluate");
  report->add_option("--out", out, "Output directory");
  bool references = false;
  report->add_flag("--references", references, "Only print the published reference table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_code(Stage::kConfig);
  }

  try {
    if (ingest->parsed()) {
      Source src{};
      InputFormat fmt{};
      try {
        src = parse_source_flag(source);
        fmt = parse_input_format(format);
      } catch (const Error& e) {
        throw StageError(Stage::kConfig, e.what());
      }
      const auto s = ingest_stage(users, optional_path(tweets), fmt, src,
                                  fs::path(out) / "documents.jsonl");
      std::printf("users %zu, tweets %zu, bios %zu, documents %zu, omitted users %zu\n", s.users,
                  s.tweets, s.bios, s.documents, s.omitted_users);
    } else if (preprocess->parsed()) {
      const auto s = preprocess_stage(documents, fs::path(out) / "clean.jsonl", workers);
      std::printf(
          "documents %zu, kept %zu, dropped: skipped %zu, emptied %zu, below min chars %zu\n",
          s.documents, s.kept, s.skipped, s.emptied, s.below_min_chars);
    } else if (featurize->parsed()) {
      FeaturizerConfig f;
      try {
        f = feature_flags.featurizer();
        const FeatureKind kind = parse_feature_kind(feature_flags.feature);
        if (kind != FeatureKind::kWordBigram && kind != FeatureKind::kChar4gram) {
          throw Error(ErrorCode::kConfiguration, "featurize handles n-gram features only");
        }
      } catch (const Error& e) {
        throw StageError(Stage::kConfig, e.what());
      }
      const auto s = featurize_stage(clean, f, out);
      std::printf("documents %zu, vocabulary %zu, nonzeros %zu\n", s.documents,
                  s.vocabulary_size, s.nonzeros);
    } else if (train->parsed()) {
      TrainRequest r;
      try {
        r.clean = clean;
        r.feature = parse_feature_kind(train_features.feature);
        r.model = parse_model_kind(model);
        r.train = train_flags.config(r.model);
        r.hidden_units = train_flags.hidden;
        if (r.feature != FeatureKind::kEmbeddings) r.featurizer = train_features.featurizer();
        r.embeddings = optional_path(embeddings);
        r.out_model = fs::path(out) / "model.json";
      } catch (const Error& e) {
        throw StageError(Stage::kConfig, e.what());
      }
      train_stage(r);
      std::printf("model written to %s\n", r.out_model.string().c_str());
    } else if (evaluate->parsed()) {
      EvaluateRequest r;
      r.clean = clean;
      r.model = optional_path(model_file);
      r.embeddings = optional_path(embeddings);
      r.scores = optional_path(scores);
      r.threshold = threshold;
      r.out_dir = out;
      r.svg = !no_svg;
      print_evaluation(evaluate_stage(r), "Evaluation");
    } else if (run->parsed()) {
      ExperimentConfig c;
      try {
        if (!manifest.empty()) {
          c = config_from_manifest(manifest);
          c.out_dir = out;
          c.workers = workers;
        } else {
          c.users = users;
          c.tweets = optional_path(tweets);
          c.embeddings = optional_path(embeddings);
          c.scores = optional_path(scores);
          c.out_dir = out;
          c.format = parse_input_format(format);
          c.source = parse_source_flag(source);
          c.feature = parse_feature_kind(run_feature);
          c.model = parse_model_kind(model);
          c.split.train_fraction = split;
          c.split.seed = run_train.seed;
          c.split.stratified = !no_stratify;
          c.train = run_train.config(c.model);
          c.learning_rate = run_train.lr;
          c.hidden_units = run_train.hidden;
          c.weighting = parse_weighting(run_weighting);
          c.min_df = run_min_df;
          c.folds = folds;
          c.threshold = threshold;
          c.cv_full = cv_full;
          c.workers = workers;
          c.svg = !no_svg;
        }
      } catch (const Error& e) {
        throw StageError(Stage::kConfig, e.what());
      }
      const ExperimentResult r = run_experiment(c);
      std::printf("documents in %zu, used %zu (cv %zu, held out %zu)\n\n", r.counts.documents_in,
                  r.counts.used, r.counts.cv_documents, r.counts.held_out_documents);
      std::fputs(format_cv_table(r.cv).c_str(), stdout);
      if (r.held_out) {
        std::printf("\n");
        print_evaluation(*r.held_out, "Held-out split");
      }
      std::printf("\nreports written to %s\n", c.out_dir.string().c_str());
    } else if (report->parsed()) {
      if (references) {
        std::fputs(format_reference_table().c_str(), stdout);
      } else if (report_path.empty()) {
        throw StageError(Stage::kConfig, "report needs --report (or --references)");
      } else {
        std::fputs(report_stage(report_path, out).c_str(), stdout);
      }
    }
  } catch (const StageError& e) {
    std::fprintf(stderr, "mhscreen: %s\n", e.what());
    return exit_code(e.stage());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "mhscreen: %s\n", e.what());
    return 1;
  }
  return 0;
}
