#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "mhscreen/corpus.hpp"
#include "mhscreen/features.hpp"

namespace mhscreen {

struct TrainConfig {
  std::size_t epochs = 5;
  double learning_rate = 0.1;
  std::size_t batch_size = 32;
  double l2_penalty = 1e-4;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

inline constexpr double kDecisionThreshold = 0.5;
inline constexpr std::size_t kDefaultHiddenUnits = 64;
inline constexpr double kDefaultMlpLearningRate = 0.05;

struct SparseSample {
  FeatureVector features;
  Label label;
};

struct DenseSample {
  std::vector<double> embedding;
  Label label;
};

// Regularized loss recorded at the end of every epoch (full training set).
struct TrainHistory {
  std::vector<double> epoch_loss;
};

double sigmoid(double z);

struct LogisticModel {
  std::vector<double> weights;
  double bias = 0.0;

  static LogisticModel zeros(std::size_t dimension);
  std::size_t dimension() const noexcept { return weights.size(); }
  double decision(const FeatureVector& x) const;
  double predict_proba(const FeatureVector& x) const { return sigmoid(decision(x)); }
};

struct LogisticGradient {
  std::vector<double> weights;
  double bias = 0.0;
};

// Mean binary cross-entropy plus (l2 / 2) * ||w||^2; the bias is not
// penalized.
double logistic_loss(const LogisticModel& model, std::span<const SparseSample> batch,
                     double l2_penalty);
LogisticGradient logistic_gradient(const LogisticModel& model,
                                   std::span<const SparseSample> batch,
                                   double l2_penalty);

// One rectified-linear hidden layer and a sigmoid output unit.
struct MlpModel {
  std::size_t input_dim = 0;
  std::size_t hidden_units = 0;
  std::vector<double> hidden_weights;  // input_dim x hidden_units, row per input
  std::vector<double> hidden_bias;     // hidden_units
  std::vector<double> output_weights;  // hidden_units
  double output_bias = 0.0;

  // Weights uniform in +-1/sqrt(fan_in), biases zero.
  static MlpModel initialize(std::size_t input_dim, std::size_t hidden_units,
                             std::uint64_t seed);
  std::size_t dimension() const noexcept { return input_dim; }
  double decision(const FeatureVector& x) const;
  double predict_proba(const FeatureVector& x) const { return sigmoid(decision(x)); }
};

struct MlpGradient {
  std::vector<double> hidden_weights;
  std::vector<double> hidden_bias;
  std::vector<double> output_weights;
  double output_bias = 0.0;
};

// Same objective as logistic_loss; both weight layers are penalized.
double mlp_loss(const MlpModel& model, std::span<const SparseSample> batch,
                double l2_penalty);
MlpGradient mlp_gradient(const MlpModel& model, std::span<const SparseSample> batch,
                         double l2_penalty);

// Linear head over dense encoder embeddings.
struct EmbeddingHead {
  std::vector<double> weights;
  double bias = 0.0;

  static EmbeddingHead zeros(std::size_t embedding_dim);
  std::size_t embedding_dim() const noexcept { return weights.size(); }
  double decision(std::span<const double> embedding) const;
  double predict_proba(std::span<const double> embedding) const {
    return sigmoid(decision(embedding));
  }
};

double head_loss(const EmbeddingHead& head, std::span<const DenseSample> batch,
                 double l2_penalty);

// Mini-batch gradient descent, zero-initialized, one seeded shuffle per
// epoch. Deterministic for fixed inputs.
LogisticModel train_logistic(std::span<const SparseSample> train,
                             const TrainConfig& config,
                             TrainHistory* history = nullptr);
MlpModel train_mlp(std::span<const SparseSample> train, std::size_t hidden_units,
                   const TrainConfig& config, TrainHistory* history = nullptr);
EmbeddingHead train_embedding_head(std::span<const DenseSample> train,
                                   const TrainConfig& config,
                                   TrainHistory* history = nullptr);

using Classifier = std::variant<LogisticModel, MlpModel, EmbeddingHead>;

std::string_view model_kind_name(const Classifier& model);

// Serialized model plus what is needed to score raw clean documents.
struct ModelFile {
  static constexpr int kFormatVersion = 1;

  Classifier model;
  TrainConfig train_config;
  std::optional<FeaturizerConfig> featurizer;
  std::optional<Vocabulary> vocabulary;
};

void save_model(const std::filesystem::path& path, const ModelFile& file);
ModelFile load_model(const std::filesystem::path& path);

}  // namespace mhscreen
