#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "mhscreen/features.hpp"
#include "mhscreen/models.hpp"
#include "mhscreen/preprocess.hpp"

namespace {

using namespace mhscreen;

const std::vector<std::string> kWords = {
    "sad",   "tired",  "happy", "sleep", "alone", "friends", "music", "Running",
    "today", "night",  "never", "again", "cried", "smiled",  "the",   "and",
    "WORK",  "babies", "dogs",  "coffee"};

std::vector<Document> make_documents(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, kWords.size() - 1);
  std::vector<Document> docs;
  for (std::size_t i = 0; i < count; ++i) {
    std::string text;
    for (int line = 0; line < 4; ++line) {
      for (int w = 0; w < 12; ++w) text += kWords[pick(rng)] + ' ';
      text += line % 2 ? "https://t.co/abc \xF0\x9F\x98\x80\n" : "!!\n";
    }
    docs.push_back({"u" + std::to_string(i), i % 2 ? Label::kDiagnosed : Label::kControl,
                    Source::kTweetsMerged, text});
  }
  return docs;
}

void BM_Preprocess(benchmark::State& state) {
  const auto docs = make_documents(static_cast<std::size_t>(state.range(0)), 1);
  const Preprocessor p;
  for (auto _ : state) benchmark::DoNotOptimize(p.process_all(docs));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Preprocess)->Arg(100)->Arg(1000);

void BM_Vectorize(benchmark::State& state) {
  const auto clean = Preprocessor{}.process_all(make_documents(1000, 2));
  const auto config = FeaturizerConfig::word_bigrams();
  const Vocabulary vocab = build_vocabulary(clean, config);
  for (auto _ : state) {
    for (const auto& d : clean) benchmark::DoNotOptimize(vectorize(d, vocab, config));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(clean.size()));
}
BENCHMARK(BM_Vectorize);

void BM_TrainLogistic(benchmark::State& state) {
  const auto clean = Preprocessor{}.process_all(make_documents(1000, 3));
  const auto config = FeaturizerConfig::word_bigrams();
  const Vocabulary vocab = build_vocabulary(clean, config);
  std::vector<SparseSample> samples;
  for (const auto& d : clean) samples.push_back({vectorize(d, vocab, config), d.label});
  for (auto _ : state) benchmark::DoNotOptimize(train_logistic(samples, TrainConfig{}));
}
BENCHMARK(BM_TrainLogistic);

void BM_TrainMlp(benchmark::State& state) {
  const auto clean = Preprocessor{}.process_all(make_documents(300, 4));
  const auto config = FeaturizerConfig::word_bigrams();
  const Vocabulary vocab = build_vocabulary(clean, config);
  std::vector<SparseSample> samples;
  for (const auto& d : clean) samples.push_back({vectorize(d, vocab, config), d.label});
  for (auto _ : state) {
    benchmark::DoNotOptimize(train_mlp(samples, 16, TrainConfig{}));
  }
}
BENCHMARK(BM_TrainMlp);

}  // namespace
BENCHMARK_MAIN();
