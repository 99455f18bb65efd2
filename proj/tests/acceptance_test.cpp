// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Every check compares library output against an independent
// oracle or a frozen expectation.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <nlohmann/json.hpp>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mhscreen/corpus.hpp"
#include "mhscreen/encoder_interface.hpp"
#include "mhscreen/error.hpp"
#include "mhscreen/eval.hpp"
#include "mhscreen/experiment.hpp"
#include "mhscreen/models.hpp"
#include "mhscreen/preprocess.hpp"
#include "mhscreen/report.hpp"
#include "mhscreen/utf8.hpp"
#include "test_support.hpp"

namespace {

using namespace mhscreen;
namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects the first few failure messages for a criterion.
class Checker {
 public:
  void expect(bool ok, const std::string& message) {
    if (ok) return;
    ++failures_;
    if (failures_ <= 3) messages_ += (messages_.empty() ? "" : "; ") + message;
  }
  bool ok() const { return failures_ == 0; }
  std::string summary() const {
    return messages_ + (failures_ > 3 ? " (+" + std::to_string(failures_ - 3) + " more)" : "");
  }

 private:
  int failures_ = 0;
  std::string messages_;
};

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// ---------------------------------------------------------------------------

Outcome metric_oracle() {
  const auto start = Clock::now();
  std::mt19937_64 rng(101);
  Checker c;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng() % 200;
    std::vector<double> scores(n);
    std::vector<Label> labels(n);
    const int grid = 1 + static_cast<int>(rng() % 20);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = static_cast<double>(rng() % (grid + 1)) / grid;
      labels[i] = rng() % 2 ? Label::kDiagnosed : Label::kControl;
    }
    const double threshold = std::uniform_real_distribution<double>(0.01, 0.99)(rng);
    const ConfusionMatrix m = confusion(scores, labels, threshold);
    const auto o = testing::recount(scores, labels, threshold);
    c.expect(m.tp == o.tp && m.fp == o.fp && m.tn == o.tn && m.fn == o.fn,
             "confusion differs at trial " + std::to_string(trial));

    const double tp = static_cast<double>(o.tp), fp = static_cast<double>(o.fp);
    const double tn = static_cast<double>(o.tn), fn = static_cast<double>(o.fn);
    const Metrics got = metrics_from_confusion(m);
    c.expect(std::abs(got.accuracy - (tp + tn) / (tp + tn + fp + fn)) <= 1e-12, "accuracy");
    auto same = [&](const std::optional<double>& v, double num, double den, const char* what) {
      if (den == 0.0) {
        c.expect(!v, std::string(what) + " should be undefined");
      } else {
        c.expect(v && std::abs(*v - num / den) <= 1e-12, what);
      }
    };
    same(got.precision, tp, tp + fp, "precision");
    same(got.recall, tp, tp + fn, "recall");
    // Harmonic mean in count form: 2tp / (2tp + fp + fn), defined when
    // precision and recall are both defined and not both zero.
    if (tp + fp == 0 || tp + fn == 0 || tp == 0) {
      c.expect(!got.f1, "f1 should be undefined");
    } else {
      c.expect(got.f1 && std::abs(*got.f1 - 2 * tp / (2 * tp + fp + fn)) <= 1e-12, "f1");
    }
  }
  const double t = seconds_since(start);
  c.expect(t < 5.0, "runtime " + fmt(t, 2) + " s exceeds 5 s");
  return {c.ok(), c.ok() ? "1000 instances exact, " + fmt(t, 3) + " s" : c.summary()};
}

Outcome auc_oracle() {
  const auto start = Clock::now();
  std::mt19937_64 rng(202);
  Checker c;
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + rng() % 199;
    std::vector<double> scores(n);
    std::vector<Label> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = rng() % 2 ? Label::kDiagnosed : Label::kControl;
    labels[0] = Label::kDiagnosed;
    labels[1] = Label::kControl;
    const int mode = trial % 5;
    for (std::size_t i = 0; i < n; ++i) {
      switch (mode) {
        case 0: scores[i] = 0.5; break;  // all tied
        case 1:                          // perfectly separated
          scores[i] = (labels[i] == Label::kDiagnosed ? 0.6 : 0.0) +
                      0.4 * std::uniform_real_distribution<double>()(rng);
          break;
        case 2: scores[i] = static_cast<double>(rng() % 4) / 4; break;  // heavy ties
        default: scores[i] = std::uniform_real_distribution<double>()(rng);
      }
    }
    const double got = roc_curve(scores, labels).auc;
    const double want = testing::pairwise_auc(scores, labels);
    worst = std::max(worst, std::abs(got - want));
    c.expect(std::abs(got - want) <= 1e-9, "trial " + std::to_string(trial) + " auc " +
                                               fmt(got, 12) + " vs " + fmt(want, 12));
    if (mode == 0) c.expect(got == 0.5, "all-tied auc");
    if (mode == 1) c.expect(got == 1.0, "separated auc");
  }
  const double t = seconds_since(start);
  c.expect(t < 10.0, "runtime " + fmt(t, 2) + " s exceeds 10 s");
  char detail[96];
  std::snprintf(detail, sizeof detail, "500 instances, max |diff| %.2e, %.3f s", worst, t);
  return {c.ok(), c.ok() ? detail : c.summary()};
}

Outcome roc_invariants() {
  std::mt19937_64 rng(303);
  Checker c;
  const std::vector<std::pair<const char*, std::function<double(double)>>> transforms = {
      {"square", [](double x) { return x * x; }},
      {"sqrt", [](double x) { return std::sqrt(x); }},
      {"affine", [](double x) { return 0.1 + 0.8 * x; }},
      {"logistic", [](double x) { return 1.0 / (1.0 + std::exp(-8.0 * (x - 0.5))); }},
  };
  int curves = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng() % 150;
    std::vector<double> scores(n);
    std::vector<Label> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = static_cast<double>(1 + rng() % 999) / 1000.0;  // k/1000 grid in (0, 1)
      labels[i] = rng() % 2 ? Label::kDiagnosed : Label::kControl;
    }
    labels[0] = Label::kDiagnosed;
    labels[1] = Label::kControl;
    const RocCurve base = roc_curve(scores, labels);
    ++curves;
    const auto& pts = base.points;
    c.expect(pts.front().fpr == 0.0 && pts.front().tpr == 0.0, "curve must start at (0,0)");
    c.expect(pts.back().fpr == 1.0 && pts.back().tpr == 1.0, "curve must end at (1,1)");
    for (std::size_t i = 1; i < pts.size(); ++i) {
      c.expect(pts[i].fpr >= pts[i - 1].fpr && pts[i].tpr >= pts[i - 1].tpr,
               "coordinates must be nondecreasing");
    }
    const double threshold = (static_cast<double>(rng() % 999) + 1.5) / 1000.0;
    const ConfusionMatrix cm = confusion(scores, labels, std::min(threshold, 0.999));
    for (const auto& [name, f] : transforms) {
      std::vector<double> mapped(n);
      std::transform(scores.begin(), scores.end(), mapped.begin(), f);
      const RocCurve other = roc_curve(mapped, labels);
      ++curves;
      bool same = other.points.size() == pts.size() && other.auc == base.auc;
      for (std::size_t i = 0; same && i < pts.size(); ++i) {
        same = other.points[i].fpr == pts[i].fpr && other.points[i].tpr == pts[i].tpr;
      }
      c.expect(same, std::string(name) + " transform changed the curve");
      c.expect(confusion(mapped, labels, f(std::min(threshold, 0.999))) == cm,
               std::string(name) + " transform changed the confusion matrix");
    }
  }
  return {c.ok(), c.ok() ? std::to_string(curves) + " curves, 4 strictly increasing transforms"
                         : c.summary()};
}

Outcome kfold_laws() {
  Checker c;
  std::mt19937_64 rng(404);
  std::string notes;
  const std::size_t k = 10;
  for (std::size_t n : {10u, 55u, 103u, 1000u}) {
    std::vector<Label> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = i % 2 ? Label::kControl : Label::kDiagnosed;
    std::shuffle(labels.begin(), labels.end(), rng);
    for (std::uint64_t seed : {0ull, 1ull, 99ull}) {
      for (bool stratified : {false, true}) {
        const auto strat = stratified ? std::optional(std::span<const Label>(labels)) : std::nullopt;
        std::vector<std::vector<std::size_t>> folds;
        try {
          folds = kfold_split(n, k, seed, strat);
        } catch (const Error& e) {
          // With k = 10 and two classes, n = 10 leaves each class with fewer
          // than k members, which the contract rejects.
          const bool expected = stratified && n < 2 * k && e.code() == ErrorCode::kStratification;
          c.expect(expected, "n=" + std::to_string(n) + ": unexpected error " + e.what());
          continue;
        }
        c.expect(!(stratified && n < 2 * k), "n=" + std::to_string(n) +
                                                 " stratified should have been rejected");
        c.expect(folds == kfold_split(n, k, seed, strat), "seed determinism");
        std::vector<int> seen(n, 0);
        std::size_t lo = n, hi = 0, plo = n, phi = 0, nlo = n, nhi = 0;
        for (const auto& f : folds) {
          lo = std::min(lo, f.size());
          hi = std::max(hi, f.size());
          std::size_t pos = 0;
          for (std::size_t i : f) {
            c.expect(i < n, "index out of range");
            if (i < n) ++seen[i];
            pos += labels[i] == Label::kDiagnosed;
          }
          plo = std::min(plo, pos);
          phi = std::max(phi, pos);
          nlo = std::min(nlo, f.size() - pos);
          nhi = std::max(nhi, f.size() - pos);
        }
        c.expect(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }),
                 "folds must be disjoint and exhaustive (n=" + std::to_string(n) + ")");
        c.expect(hi - lo <= 1, "fold sizes differ by more than one");
        if (stratified) {
          c.expect(phi - plo <= 1 && nhi - nlo <= 1,
                   "per-fold class counts differ by more than one (n=" + std::to_string(n) + ")");
        }
      }
    }
    if (n == 10) notes = "n=10 stratified rejected (classes smaller than k); ";
  }
  return {c.ok(), c.ok() ? notes + "all other grid cells satisfy the laws" : c.summary()};
}

// Algorithm branches exercised by one golden case, derived from its input
// with the component functions and an independent regex scan.
std::set<std::string> branches_of(const Preprocessor& p, const Document& doc,
                                  const CleanDocument& out) {
  std::set<std::string> hit;
  std::vector<std::string> values;
  if (doc.source == Source::kTweetsMerged) {
    std::stringstream in(doc.text);
    for (std::string line; std::getline(in, line);) values.push_back(line);
  } else {
    values.push_back(doc.text);
  }
  static const std::regex url{std::string(kDefaultUrlPattern)};
  const auto emoji = default_emoji_ranges();
  std::string survivors;
  for (const auto& v : values) {
    const auto d = p.should_skip(v);
    if (d.reason == SkipReason::kRetweet) hit.insert("skip:retweet");
    if (d.reason == SkipReason::kMention) hit.insert("skip:mention");
    if (d.reason == SkipReason::kNonEnglish) hit.insert("skip:non_english");
    if (d.skip) continue;
    survivors += v + "\n";
    if (std::regex_search(v, url)) hit.insert("url_removed");
    std::size_t pos = 0;
    while (pos < v.size()) {
      const char32_t cp = utf8::decode(v, pos);
      for (const auto& r : emoji) {
        if (r.contains(cp)) hit.insert("emoji_removed");
      }
    }
    if (std::any_of(v.begin(), v.end(), [](char ch) { return ch >= 'A' && ch <= 'Z'; })) {
      hit.insert("lowercased");
    }
  }
  if (!survivors.empty()) {
    const auto tokens = tokenize(p.clean_text(survivors));
    const auto kept = p.remove_stopwords(tokens);
    if (kept.size() < tokens.size()) hit.insert("stopword_removed");
    for (const auto& t : kept) {
      if (lemmatize(t) != t) hit.insert("lemmatized");
    }
  }
  hit.insert("drop:" + std::string(to_string(out.drop_reason)));
  return hit;
}

Outcome golden_corpus() {
  std::ifstream in(testing::test_data_dir() / "preprocess_golden.json");
  if (!in) return {false, "golden file missing"};
  const json cases = json::parse(in);
  const Preprocessor p;
  Checker c;
  std::map<std::string, int> coverage;
  for (const auto& k : {"skip:retweet", "skip:mention", "skip:non_english", "url_removed",
                        "emoji_removed", "lowercased", "stopword_removed", "lemmatized",
                        "drop:none", "drop:skipped", "drop:emptied", "drop:below_min_chars"}) {
    coverage[k] = 0;
  }
  std::size_t matched = 0;
  for (const auto& tc : cases) {
    const Document doc{"g", Label::kControl, parse_source(tc.at("source").get<std::string>()),
                       tc.at("text").get<std::string>()};
    const CleanDocument out = p.process(doc);
    const bool ok = out.tokens == tc.at("tokens").get<std::vector<std::string>>() &&
                    to_string(out.drop_reason) == tc.at("drop_reason").get<std::string>();
    matched += ok;
    c.expect(ok, "case " + tc.at("name").get<std::string>() + " differs");
    for (const auto& b : branches_of(p, doc, out)) ++coverage[b];
  }
  c.expect(cases.size() >= 20, "fewer than 20 golden cases");
  std::string low;
  for (const auto& [branch, count] : coverage) {
    if (count < 2) low += " " + branch + "=" + std::to_string(count);
  }
  c.expect(low.empty(), "branches exercised fewer than twice:" + low);
  int min_cov = 1 << 30;
  for (const auto& [b, n] : coverage) min_cov = std::min(min_cov, n);
  return {c.ok(), c.ok() ? std::to_string(matched) + "/" + std::to_string(cases.size()) +
                               " cases match; " + std::to_string(coverage.size()) +
                               " branches, each hit >= " + std::to_string(min_cov) + " times"
                         : c.summary()};
}

std::string fuzz_value(std::mt19937_64& rng) {
  static const std::vector<std::string> pieces = {
      "The",    "AND",     "sad",     "Feeling", "others", "babies",   "don't", "'quoted'",
      "RT",     "@user",   "#tag",    "http://x.co/a?b=1",   "https://Site.ORG", "www.example.com",
      "HTTP://LOUD.COM",   "wWw.",    "http://", "42",      "3am",    "!!",      "...",
      "\xF0\x9F\x98\x80",   // grinning face
      "\xE2\x9D\xA4\xEF\xB8\x8F",  // heart + variation selector
      "\xF0\x9F\x87\xBA\xF0\x9F\x87\xB8",  // flag
      "\xE2\x80\x8D",       // zero-width joiner
      "caf\xC3\xA9",        // accented Latin
      "\xD0\x9F\xD1\x80\xD0\xB8",  // Cyrillic
      "\xE6\x9D\xB1\xE4\xBA\xAC",  // CJK
      "\xC2\xA0",           // no-break space
      "\t", "\n", " ", "  ", "-", "_", "ALLCAPS", "MiXeD", "it's", "Ourselves", "YOURS"};
  std::uniform_int_distribution<std::size_t> pick(0, pieces.size() - 1), len(0, 14);
  std::string s;
  for (std::size_t i = len(rng); i > 0; --i) {
    s += pieces[pick(rng)];
    if (rng() % 3) s += ' ';
  }
  return s;
}

Outcome purity_fuzz() {
  const Preprocessor p;
  const auto& stop = shipped_stopwords();
  const auto emoji = default_emoji_ranges();
  const std::regex url{std::string(kDefaultUrlPattern)};
  std::mt19937_64 rng(505);
  Checker c;
  std::size_t tokens_seen = 0;
  for (int i = 0; i < 10000; ++i) {
    std::string text = fuzz_value(rng);
    if (i % 2) text += "\n" + fuzz_value(rng);
    const Source source = i % 2 ? Source::kTweetsMerged : Source::kBio;
    const CleanDocument out = p.process({"f", Label::kControl, source, text});
    for (const auto& t : out.tokens) {
      ++tokens_seen;
      c.expect(!std::regex_search(t, url), "token matches the URL pattern: " + t);
      c.expect(!stop.contains(t), "stopword survived: " + t);
      c.expect(std::none_of(t.begin(), t.end(), [](char ch) { return ch >= 'A' && ch <= 'Z'; }),
               "uppercase survived: " + t);
      std::size_t pos = 0;
      while (pos < t.size()) {
        const char32_t cp = utf8::decode(t, pos);
        for (const auto& r : emoji) c.expect(!r.contains(cp), "emoji survived in: " + t);
      }
    }
    const std::string once = p.clean_text(text);
    c.expect(p.clean_text(once) == once, "clean_text not idempotent on: " + text);
  }
  return {c.ok(), c.ok() ? "10000 inputs, " + std::to_string(tokens_seen) + " tokens clean"
                         : c.summary()};
}

FeatureVector dense_vector(const std::vector<double>& v) {
  FeatureVector x;
  x.dimension = v.size();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] != 0.0) x.entries.push_back({static_cast<std::uint32_t>(i), v[i]});
  }
  return x;
}

double rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(d) / std::max(std::sqrt(na) + std::sqrt(nb), 1e-12);
}

Outcome gradient_checks() {
  std::mt19937_64 rng(606);
  std::normal_distribution<double> normal;
  const double eps = 1e-5;
  Checker c;
  double worst_lr = 0, worst_mlp = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng() % 6, dim = 1 + rng() % 5;
    std::vector<SparseSample> batch;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> v(dim);
      for (auto& x : v) x = normal(rng);
      batch.push_back({dense_vector(v), rng() % 2 ? Label::kDiagnosed : Label::kControl});
    }
    const double l2 = 0.01 * static_cast<double>(rng() % 5);

    LogisticModel lr = LogisticModel::zeros(dim);
    for (auto& w : lr.weights) w = normal(rng);
    lr.bias = normal(rng);
    const LogisticGradient g = logistic_gradient(lr, batch, l2);
    std::vector<double> analytic = g.weights, numeric;
    analytic.push_back(g.bias);
    for (std::size_t i = 0; i <= dim; ++i) {
      double& p = i < dim ? lr.weights[i] : lr.bias;
      const double saved = p;
      p = saved + eps;
      const double up = logistic_loss(lr, batch, l2);
      p = saved - eps;
      const double down = logistic_loss(lr, batch, l2);
      p = saved;
      numeric.push_back((up - down) / (2 * eps));
    }
    const double e1 = rel_error(analytic, numeric);
    worst_lr = std::max(worst_lr, e1);
    c.expect(e1 <= 1e-4, "logistic relative error " + fmt(e1, 8));

    MlpModel m = MlpModel::initialize(dim, 1 + rng() % 5, rng());
    for (auto& b : m.hidden_bias) b = 0.1 * normal(rng);
    m.output_bias = normal(rng);
    const MlpGradient mg = mlp_gradient(m, batch, l2);
    std::vector<double> ma, mn;
    auto probe = [&](double& p, double grad) {
      const double saved = p;
      p = saved + eps;
      const double up = mlp_loss(m, batch, l2);
      p = saved - eps;
      const double down = mlp_loss(m, batch, l2);
      p = saved;
      ma.push_back(grad);
      mn.push_back((up - down) / (2 * eps));
    };
    for (std::size_t i = 0; i < m.hidden_weights.size(); ++i) probe(m.hidden_weights[i], mg.hidden_weights[i]);
    for (std::size_t i = 0; i < m.hidden_bias.size(); ++i) probe(m.hidden_bias[i], mg.hidden_bias[i]);
    for (std::size_t i = 0; i < m.output_weights.size(); ++i) probe(m.output_weights[i], mg.output_weights[i]);
    probe(m.output_bias, mg.output_bias);
    const double e2 = rel_error(ma, mn);
    worst_mlp = std::max(worst_mlp, e2);
    c.expect(e2 <= 1e-3, "mlp relative error " + fmt(e2, 8));
  }
  char detail[128];
  std::snprintf(detail, sizeof detail,
                "50 instances each, worst relative error logistic %.2e, mlp %.2e", worst_lr,
                worst_mlp);
  return {c.ok(), c.ok() ? detail : c.summary()};
}

ExperimentConfig synthetic_run(const testing::TempDir& dir, const testing::SyntheticSpec& spec,
                               const std::string& name) {
  const auto corpus = testing::write_synthetic_corpus(dir / name, spec);
  ExperimentConfig cfg;
  cfg.users = corpus.users;
  cfg.tweets = corpus.tweets;
  cfg.out_dir = dir / name / "out";
  cfg.feature = FeatureKind::kWordBigram;
  cfg.model = ModelKind::kLogistic;
  cfg.cv_full = true;
  cfg.svg = false;
  return cfg;
}

Outcome end_to_end() {
  testing::TempDir dir;
  Checker c;
  const auto start = Clock::now();
  testing::SyntheticSpec spec;
  spec.users = 500;
  ExperimentConfig cfg = synthetic_run(dir, spec, "real");
  const ExperimentResult r = run_experiment(cfg);
  const double t = seconds_since(start);
  c.expect(r.counts.used == 500, "expected 500 documents, used " + std::to_string(r.counts.used));
  c.expect(r.cv.k == 10 && r.cv.valid_folds() == 10, "expected 10 valid folds");
  c.expect(cfg.resolved_train_config().epochs == 5, "expected 5 epochs");
  const double acc = r.cv.aggregate.at("accuracy").mean;
  const double auc = r.cv.aggregate.count("auc") ? r.cv.aggregate.at("auc").mean : 0.0;
  c.expect(acc >= 0.95, "mean accuracy " + fmt(acc));
  c.expect(auc >= 0.98, "mean AUC " + fmt(auc));
  c.expect(t < 60.0, "runtime " + fmt(t, 1) + " s");

  // Label-shuffled control, n = 200, over 20 seeds.
  double lo = 1.0, hi = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    testing::SyntheticSpec shuffled;
    shuffled.users = 200;
    shuffled.shuffle_labels = true;
    shuffled.seed = 1000 + seed;
    ExperimentConfig sc = synthetic_run(dir, shuffled, "shuffled" + std::to_string(seed));
    sc.split.seed = seed;
    const auto sr = run_experiment(sc);
    const double a = sr.cv.aggregate.at("auc").mean;
    lo = std::min(lo, a);
    hi = std::max(hi, a);
    c.expect(std::abs(a - 0.5) <= 0.15, "shuffled seed " + std::to_string(seed) + " AUC " + fmt(a));
  }
  return {c.ok(), c.ok() ? "accuracy " + fmt(acc) + ", AUC " + fmt(auc) + ", " + fmt(t, 2) +
                               " s; shuffled AUC range [" + fmt(lo, 3) + ", " + fmt(hi, 3) +
                               "] over 20 seeds"
                         : c.summary()};
}

Outcome embedding_path() {
  Checker c;
  const fs::path data = testing::test_data_dir();
  const EmbeddingSet set = load_embeddings(data / "embeddings_8d.jsonl");
  c.expect(set.dim == 8 && set.entries.size() == 200, "fixture must hold 200 vectors of dim 8");
  const auto users = load_users(data / "embedding_users.csv", std::nullopt, InputFormat::kCsv);
  const Dataset ds = build_documents(users, Source::kBio);
  const auto aligned = align(ds, set);
  c.expect(aligned.unmatched_documents == 0 && aligned.unmatched_entries == 0,
           "fixture ids must align one to one");

  std::vector<DenseSample> samples;
  std::vector<Label> labels;
  for (const auto& [i, vec] : aligned.pairs) {
    samples.push_back({std::vector<double>(vec.begin(), vec.end()), ds.documents()[i].label});
    labels.push_back(ds.documents()[i].label);
  }
  const FoldTrainer trainer = [&](std::span<const std::size_t> train,
                                  std::span<const std::size_t> test) {
    std::vector<DenseSample> part;
    for (std::size_t i : train) part.push_back(samples[i]);
    const EmbeddingHead head = train_embedding_head(part, TrainConfig{});
    std::vector<double> out;
    for (std::size_t i : test) out.push_back(head.predict_proba(samples[i].embedding));
    return out;
  };
  const CvReport r = cross_validate(labels, trainer, CvOptions{});
  const double acc = r.aggregate.at("accuracy").mean;
  c.expect(r.valid_folds() == 10, "expected 10 valid folds");
  c.expect(acc >= 0.95, "mean accuracy " + fmt(acc));
  return {c.ok(), c.ok() ? "10-fold mean accuracy " + fmt(acc) : c.summary()};
}

std::string strip_timestamp(const std::string& report) {
  std::istringstream in(report);
  std::string out;
  for (std::string line; std::getline(in, line);) {
    if (line.find("\"generated_at\"") == std::string::npos) out += line + "\n";
  }
  return out;
}

Outcome reproducibility() {
  testing::TempDir dir;
  Checker c;
  testing::SyntheticSpec spec;
  spec.users = 150;
  ExperimentConfig cfg = synthetic_run(dir, spec, "repro");
  cfg.cv_full = false;
  cfg.model = ModelKind::kMlp;
  cfg.hidden_units = 8;
  cfg.train.seed = 3;
  run_experiment(cfg);
  const fs::path manifest = cfg.out_dir / "manifest.json";

  std::vector<std::string> reports;
  for (unsigned workers : {1u, 4u}) {
    ExperimentConfig again = config_from_manifest(manifest);
    again.out_dir = dir / ("rerun" + std::to_string(workers));
    again.workers = workers;
    run_experiment(again);
    reports.push_back(read_text_file(again.out_dir / "report.json"));
  }
  c.expect(strip_timestamp(reports[0]) == strip_timestamp(reports[1]),
           "reports differ beyond the timestamp");
  c.expect(reports[0] != strip_timestamp(reports[0]), "timestamp key missing");
  return {c.ok(), c.ok() ? "two manifest runs byte-identical apart from generated_at"
                         : c.summary()};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"metric oracle equivalence", metric_oracle},
      {"AUC oracle equivalence", auc_oracle},
      {"ROC invariants", roc_invariants},
      {"k-fold laws", kfold_laws},
      {"preprocessing golden corpus", golden_corpus},
      {"preprocessing purity", purity_fuzz},
      {"gradient checks", gradient_checks},
      {"end-to-end capability", end_to_end},
      {"embedding-path capability", embedding_path},
      {"reproducibility", reproducibility},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s  %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
