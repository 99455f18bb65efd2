#include "mhscreen/models.hpp"

#include <cmath>
#include <functional>
#include <nlohmann/json.hpp>
#include <numeric>

#include "io_util.hpp"
#include "mhscreen/error.hpp"
#include "mhscreen/rng.hpp"

namespace mhscreen {

using nlohmann::json;

void TrainConfig::validate() const {
  if (epochs < 1) throw Error(ErrorCode::kConfiguration, "epochs must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorCode::kConfiguration, "learning_rate must be positive");
  }
  if (batch_size < 1) throw Error(ErrorCode::kConfiguration, "batch_size must be >= 1");
  if (!(l2_penalty >= 0.0) || !std::isfinite(l2_penalty)) {
    throw Error(ErrorCode::kConfiguration, "l2_penalty must be nonnegative");
  }
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

double target(Label label) { return label == Label::kDiagnosed ? 1.0 : 0.0; }

// -log(sigmoid(z)) for positives, -log(1 - sigmoid(z)) for negatives.
double bce_from_logit(double z, double y) {
  const double softplus = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  return softplus - y * z;
}

double squared_norm(std::span<const double> v) {
  return std::inner_product(v.begin(), v.end(), v.begin(), 0.0);
}

void check_dimension(std::size_t expected, std::size_t got, const char* what) {
  if (expected != got) {
    throw Error(ErrorCode::kDimensionMismatch, std::string(what) + ": expected dimension " +
                                                   std::to_string(expected) + ", got " +
                                                   std::to_string(got));
  }
}

double dot(std::span<const double> w, const FeatureVector& x) {
  double s = 0.0;
  for (const auto& e : x.entries) s += w[e.index] * e.value;
  return s;
}

double dot(std::span<const double> w, std::span<const double> x) {
  return std::inner_product(w.begin(), w.end(), x.begin(), 0.0);
}

void axpy(std::span<double> y, double a, const FeatureVector& x) {
  for (const auto& e : x.entries) y[e.index] += a * e.value;
}

void axpy(std::span<double> y, double a, std::span<const double> x) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

const FeatureVector& input_of(const SparseSample& s) { return s.features; }
std::span<const double> input_of(const DenseSample& s) { return s.embedding; }
std::size_t dimension_of(const SparseSample& s) { return s.features.dimension; }
std::size_t dimension_of(const DenseSample& s) { return s.embedding.size(); }

template <typename Sample>
std::size_t check_training_set(std::span<const Sample> train) {
  if (train.empty()) throw Error(ErrorCode::kDegenerateData, "training set is empty");
  const std::size_t dim = dimension_of(train.front());
  bool pos = false, neg = false;
  for (const Sample& s : train) {
    check_dimension(dim, dimension_of(s), "training sample");
    (s.label == Label::kDiagnosed ? pos : neg) = true;
  }
  if (!pos || !neg) {
    throw Error(ErrorCode::kDegenerateData, "training set contains a single class");
  }
  return dim;
}

// Weights and bias of a linear scorer; shared by the logistic model and the
// embedding head.
struct LinearParams {
  std::vector<double> w;
  double b = 0.0;
};

template <typename Sample, typename Range>
double linear_loss(const LinearParams& p, const Range& batch, double l2) {
  double loss = 0.0;
  for (const Sample& s : batch) {
    loss += bce_from_logit(dot(p.w, input_of(s)) + p.b, target(s.label));
  }
  return loss / static_cast<double>(batch.size()) + 0.5 * l2 * squared_norm(p.w);
}

template <typename Sample, typename Range>
LinearParams linear_gradient(const LinearParams& p, const Range& batch, double l2) {
  LinearParams g{std::vector<double>(p.w.size(), 0.0), 0.0};
  for (const Sample& s : batch) {
    const double r = sigmoid(dot(p.w, input_of(s)) + p.b) - target(s.label);
    axpy(g.w, r, input_of(s));
    g.b += r;
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < g.w.size(); ++i) g.w[i] = g.w[i] * inv + l2 * p.w[i];
  g.b *= inv;
  return g;
}

void check_finite_loss(double loss, std::size_t epoch) {
  if (!std::isfinite(loss)) {
    throw Error(ErrorCode::kDivergence,
                "training diverged: non-finite loss at epoch " + std::to_string(epoch));
  }
}

template <typename Sample>
using Batch = std::vector<std::reference_wrapper<const Sample>>;

// Calls step(batch) for each mini-batch of every epoch and epoch_end(epoch)
// after each pass. The batch order comes from one seeded shuffle per epoch.
template <typename Sample, typename Step, typename EpochEnd>
void run_minibatches(std::span<const Sample> train, const TrainConfig& cfg, Step&& step,
                     EpochEnd&& epoch_end) {
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Batch<Sample> batch;
  batch.reserve(cfg.batch_size);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(std::span(order));
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(std::cref(train[order[i]]));
      step(batch);
    }
    epoch_end(epoch);
  }
}

template <typename Sample>
LinearParams train_linear(std::span<const Sample> train, const TrainConfig& cfg,
                          TrainHistory* history) {
  cfg.validate();
  const std::size_t dim = check_training_set(train);
  LinearParams p{std::vector<double>(dim, 0.0), 0.0};
  run_minibatches(
      train, cfg,
      [&](const Batch<Sample>& batch) {
        const LinearParams g = linear_gradient<Sample>(p, batch, cfg.l2_penalty);
        for (std::size_t i = 0; i < dim; ++i) p.w[i] -= cfg.learning_rate * g.w[i];
        p.b -= cfg.learning_rate * g.b;
      },
      [&](std::size_t epoch) {
        const double loss = linear_loss<Sample>(p, train, cfg.l2_penalty);
        check_finite_loss(loss, epoch);
        if (history) history->epoch_loss.push_back(loss);
      });
  return p;
}

}  // namespace

// Logistic regression

LogisticModel LogisticModel::zeros(std::size_t dimension) {
  return {std::vector<double>(dimension, 0.0), 0.0};
}

double LogisticModel::decision(const FeatureVector& x) const {
  check_dimension(weights.size(), x.dimension, "logistic model input");
  return dot(weights, x) + bias;
}

double logistic_loss(const LogisticModel& model, std::span<const SparseSample> batch,
                     double l2_penalty) {
  for (const auto& s : batch) check_dimension(model.dimension(), s.features.dimension, "sample");
  return linear_loss<SparseSample>(LinearParams{model.weights, model.bias}, batch, l2_penalty);
}

LogisticGradient logistic_gradient(const LogisticModel& model,
                                   std::span<const SparseSample> batch, double l2_penalty) {
  for (const auto& s : batch) check_dimension(model.dimension(), s.features.dimension, "sample");
  auto g = linear_gradient<SparseSample>(LinearParams{model.weights, model.bias}, batch,
                                         l2_penalty);
  return {std::move(g.w), g.b};
}

LogisticModel train_logistic(std::span<const SparseSample> train, const TrainConfig& config,
                             TrainHistory* history) {
  auto p = train_linear(train, config, history);
  return {std::move(p.w), p.b};
}

// Embedding head

EmbeddingHead EmbeddingHead::zeros(std::size_t embedding_dim) {
  return {std::vector<double>(embedding_dim, 0.0), 0.0};
}

double EmbeddingHead::decision(std::span<const double> embedding) const {
  check_dimension(weights.size(), embedding.size(), "embedding head input");
  return dot(weights, embedding) + bias;
}

double head_loss(const EmbeddingHead& head, std::span<const DenseSample> batch,
                 double l2_penalty) {
  for (const auto& s : batch) check_dimension(head.embedding_dim(), s.embedding.size(), "sample");
  return linear_loss<DenseSample>(LinearParams{head.weights, head.bias}, batch, l2_penalty);
}

EmbeddingHead train_embedding_head(std::span<const DenseSample> train, const TrainConfig& config,
                                   TrainHistory* history) {
  auto p = train_linear(train, config, history);
  return {std::move(p.w), p.b};
}

// Multilayer perceptron

MlpModel MlpModel::initialize(std::size_t input_dim, std::size_t hidden_units,
                              std::uint64_t seed) {
  if (input_dim < 1 || hidden_units < 1) {
    throw Error(ErrorCode::kConfiguration, "MLP needs input_dim >= 1 and hidden_units >= 1");
  }
  MlpModel m;
  m.input_dim = input_dim;
  m.hidden_units = hidden_units;
  Rng rng(seed);
  const double r1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
  const double r2 = 1.0 / std::sqrt(static_cast<double>(hidden_units));
  m.hidden_weights.resize(input_dim * hidden_units);
  for (double& w : m.hidden_weights) w = rng.uniform(-r1, r1);
  m.hidden_bias.assign(hidden_units, 0.0);
  m.output_weights.resize(hidden_units);
  for (double& w : m.output_weights) w = rng.uniform(-r2, r2);
  m.output_bias = 0.0;
  return m;
}

namespace {

// Hidden pre-activations for one input.
void hidden_preactivation(const MlpModel& m, const FeatureVector& x, std::vector<double>& a) {
  a.assign(m.hidden_bias.begin(), m.hidden_bias.end());
  for (const auto& e : x.entries) {
    const double* row = &m.hidden_weights[static_cast<std::size_t>(e.index) * m.hidden_units];
    for (std::size_t j = 0; j < m.hidden_units; ++j) a[j] += row[j] * e.value;
  }
}

double output_logit(const MlpModel& m, const std::vector<double>& a) {
  double z = m.output_bias;
  for (std::size_t j = 0; j < m.hidden_units; ++j) {
    z += m.output_weights[j] * std::max(0.0, a[j]);
  }
  return z;
}

double mlp_penalty(const MlpModel& m) {
  return squared_norm(m.hidden_weights) + squared_norm(m.output_weights);
}

}  // namespace

double MlpModel::decision(const FeatureVector& x) const {
  check_dimension(input_dim, x.dimension, "MLP input");
  std::vector<double> a;
  hidden_preactivation(*this, x, a);
  return output_logit(*this, a);
}

namespace {

template <typename Range>
double mlp_loss_impl(const MlpModel& model, const Range& batch, double l2_penalty) {
  double loss = 0.0;
  std::vector<double> a;
  for (const SparseSample& s : batch) {
    check_dimension(model.input_dim, s.features.dimension, "sample");
    hidden_preactivation(model, s.features, a);
    loss += bce_from_logit(output_logit(model, a), target(s.label));
  }
  return loss / static_cast<double>(batch.size()) + 0.5 * l2_penalty * mlp_penalty(model);
}

template <typename Range>
MlpGradient mlp_gradient_impl(const MlpModel& model, const Range& batch, double l2_penalty) {
  const std::size_t h = model.hidden_units;
  MlpGradient g{std::vector<double>(model.hidden_weights.size(), 0.0),
                std::vector<double>(h, 0.0), std::vector<double>(h, 0.0), 0.0};
  std::vector<double> a;
  std::vector<double> delta(h);
  for (const SparseSample& s : batch) {
    check_dimension(model.input_dim, s.features.dimension, "sample");
    hidden_preactivation(model, s.features, a);
    const double dz = sigmoid(output_logit(model, a)) - target(s.label);
    g.output_bias += dz;
    for (std::size_t j = 0; j < h; ++j) {
      const bool active = a[j] > 0.0;
      g.output_weights[j] += dz * (active ? a[j] : 0.0);
      delta[j] = active ? dz * model.output_weights[j] : 0.0;
      g.hidden_bias[j] += delta[j];
    }
    for (const auto& e : s.features.entries) {
      double* row = &g.hidden_weights[static_cast<std::size_t>(e.index) * h];
      for (std::size_t j = 0; j < h; ++j) row[j] += delta[j] * e.value;
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < g.hidden_weights.size(); ++i) {
    g.hidden_weights[i] = g.hidden_weights[i] * inv + l2_penalty * model.hidden_weights[i];
  }
  for (std::size_t j = 0; j < h; ++j) {
    g.hidden_bias[j] *= inv;
    g.output_weights[j] = g.output_weights[j] * inv + l2_penalty * model.output_weights[j];
  }
  g.output_bias *= inv;
  return g;
}

}  // namespace

double mlp_loss(const MlpModel& model, std::span<const SparseSample> batch, double l2_penalty) {
  return mlp_loss_impl(model, batch, l2_penalty);
}

MlpGradient mlp_gradient(const MlpModel& model, std::span<const SparseSample> batch,
                         double l2_penalty) {
  return mlp_gradient_impl(model, batch, l2_penalty);
}

MlpModel train_mlp(std::span<const SparseSample> train, std::size_t hidden_units,
                   const TrainConfig& config, TrainHistory* history) {
  config.validate();
  const std::size_t dim = check_training_set(train);
  MlpModel m = MlpModel::initialize(dim, hidden_units, config.seed);
  const double lr = config.learning_rate;
  run_minibatches(
      train, config,
      [&](const Batch<SparseSample>& batch) {
        const MlpGradient g = mlp_gradient_impl(m, batch, config.l2_penalty);
        for (std::size_t i = 0; i < m.hidden_weights.size(); ++i) {
          m.hidden_weights[i] -= lr * g.hidden_weights[i];
        }
        for (std::size_t j = 0; j < m.hidden_units; ++j) {
          m.hidden_bias[j] -= lr * g.hidden_bias[j];
          m.output_weights[j] -= lr * g.output_weights[j];
        }
        m.output_bias -= lr * g.output_bias;
      },
      [&](std::size_t epoch) {
        const double loss = mlp_loss(m, train, config.l2_penalty);
        check_finite_loss(loss, epoch);
        if (history) history->epoch_loss.push_back(loss);
      });
  return m;
}

std::string_view model_kind_name(const Classifier& model) {
  struct Visitor {
    std::string_view operator()(const LogisticModel&) const { return "logistic"; }
    std::string_view operator()(const MlpModel&) const { return "mlp"; }
    std::string_view operator()(const EmbeddingHead&) const { return "embedding_head"; }
  };
  return std::visit(Visitor{}, model);
}

// Serialization

namespace {

json train_config_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"l2_penalty", c.l2_penalty},
          {"seed", c.seed}};
}

TrainConfig train_config_from(const json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<std::size_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.l2_penalty = j.at("l2_penalty").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

void require_finite(std::span<const double> values, const std::string& what) {
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kParse, what + " contains non-finite values");
  }
}

}  // namespace

void save_model(const std::filesystem::path& path, const ModelFile& file) {
  json j;
  j["format"] = "mhscreen-model";
  j["format_version"] = ModelFile::kFormatVersion;
  j["kind"] = model_kind_name(file.model);
  j["train_config"] = train_config_json(file.train_config);
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        json params;
        if constexpr (std::is_same_v<M, MlpModel>) {
          j["dimension"] = m.input_dim;
          params["hidden_units"] = m.hidden_units;
          params["hidden_weights"] = m.hidden_weights;
          params["hidden_bias"] = m.hidden_bias;
          params["output_weights"] = m.output_weights;
          params["output_bias"] = m.output_bias;
        } else {
          j["dimension"] = m.weights.size();
          params["weights"] = m.weights;
          params["bias"] = m.bias;
        }
        j["parameters"] = std::move(params);
      },
      file.model);
  if (file.featurizer) {
    const auto& f = *file.featurizer;
    j["featurizer"] = {{"kind", to_string(f.kind)},
                       {"n", f.n},
                       {"min_df", f.min_df},
                       {"weighting", to_string(f.weighting)}};
  }
  if (file.vocabulary) {
    json terms = json::array();
    for (const auto& t : file.vocabulary->terms()) {
      terms.push_back(json::array({t.text, t.document_frequency}));
    }
    j["vocabulary"] = {{"num_documents", file.vocabulary->num_documents()},
                       {"terms", std::move(terms)}};
  }
  auto out = detail::open_output(path);
  out << j.dump() << '\n';
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

ModelFile load_model(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
  try {
    if (j.value("format", "") != "mhscreen-model") {
      throw Error(ErrorCode::kParse, path.string() + ": not an mhscreen model file");
    }
    const int version = j.at("format_version").get<int>();
    if (version != ModelFile::kFormatVersion) {
      throw Error(ErrorCode::kVersion, path.string() + ": model format version " +
                                           std::to_string(version) + ", this build reads " +
                                           std::to_string(ModelFile::kFormatVersion));
    }
    const std::string kind = j.at("kind").get<std::string>();
    const std::size_t dim = j.at("dimension").get<std::size_t>();
    const json& p = j.at("parameters");
    ModelFile file{LogisticModel{}, train_config_from(j.at("train_config")), {}, {}};
    if (kind == "logistic" || kind == "embedding_head") {
      auto w = p.at("weights").get<std::vector<double>>();
      const double b = p.at("bias").get<double>();
      check_dimension(dim, w.size(), "stored weights");
      require_finite(w, "weights");
      if (kind == "logistic") {
        file.model = LogisticModel{std::move(w), b};
      } else {
        file.model = EmbeddingHead{std::move(w), b};
      }
    } else if (kind == "mlp") {
      MlpModel m;
      m.input_dim = dim;
      m.hidden_units = p.at("hidden_units").get<std::size_t>();
      m.hidden_weights = p.at("hidden_weights").get<std::vector<double>>();
      m.hidden_bias = p.at("hidden_bias").get<std::vector<double>>();
      m.output_weights = p.at("output_weights").get<std::vector<double>>();
      m.output_bias = p.at("output_bias").get<double>();
      check_dimension(dim * m.hidden_units, m.hidden_weights.size(), "stored hidden weights");
      check_dimension(m.hidden_units, m.hidden_bias.size(), "stored hidden bias");
      check_dimension(m.hidden_units, m.output_weights.size(), "stored output weights");
      require_finite(m.hidden_weights, "hidden weights");
      require_finite(m.output_weights, "output weights");
      file.model = std::move(m);
    } else {
      throw Error(ErrorCode::kParse, path.string() + ": unknown model kind '" + kind + "'");
    }
    if (j.contains("featurizer")) {
      const json& f = j["featurizer"];
      file.featurizer = FeaturizerConfig{parse_ngram_kind(f.at("kind").get<std::string>()),
                                         f.at("n").get<std::size_t>(),
                                         f.at("min_df").get<std::size_t>(),
                                         parse_weighting(f.at("weighting").get<std::string>())};
    }
    if (j.contains("vocabulary")) {
      const json& v = j["vocabulary"];
      std::vector<Vocabulary::Term> terms;
      for (const auto& t : v.at("terms")) {
        terms.push_back({t.at(0).get<std::string>(), t.at(1).get<std::size_t>()});
      }
      file.vocabulary = Vocabulary(std::move(terms), v.at("num_documents").get<std::size_t>());
    }
    return file;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
}

}  // namespace mhscreen
