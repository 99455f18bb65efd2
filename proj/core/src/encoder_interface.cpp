#include "mhscreen/encoder_interface.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <nlohmann/json.hpp>

#include "io_util.hpp"

namespace mhscreen {

using nlohmann::json;

namespace {

constexpr std::array kCheckpoints = {
    Checkpoint{"DBUFS2E", "distilbert-base-uncased-finetuned-sst-2-english"},
    Checkpoint{"BBU", "bert-base-uncased"},
    Checkpoint{"MBBU", "mental/mental-bert-base-uncased"},
    Checkpoint{"DRB", "distilroberta-base"},
};

// Calls header(line, obj) for the first non-blank line and record(line, obj)
// for the rest.
template <typename Header, typename Record>
void read_contract(const std::filesystem::path& path, Header&& header, Record&& record) {
  auto in = detail::open_input(path);
  std::string line;
  std::size_t number = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++number;
    detail::chomp(line);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kParse, detail::where(path, number) + ": " + e.what());
    }
    if (!obj.is_object()) {
      throw Error(ErrorCode::kParse, detail::where(path, number) + ": expected a JSON object");
    }
    try {
      if (!seen_header) {
        header(number, obj);
        seen_header = true;
      } else {
        record(number, obj);
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParse, detail::where(path, number) + ": " + e.what());
    }
  }
  if (!seen_header) throw Error(ErrorCode::kEmptyDataset, path.string() + ": empty file");
}

std::string format_float(float v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 9);
  return std::string(buf, res.ptr);
}

}  // namespace

std::span<const Checkpoint> known_checkpoints() { return kCheckpoints; }

std::optional<std::string_view> checkpoint_identifier(std::string_view alias) {
  for (const auto& c : kCheckpoints) {
    if (c.alias == alias) return c.identifier;
  }
  return std::nullopt;
}

EmbeddingSet load_embeddings(const std::filesystem::path& path) {
  EmbeddingSet set;
  bool header_dim = false;
  read_contract(
      path,
      [&](std::size_t line, const json& obj) {
        if (obj.contains("user_id")) {
          throw Error(ErrorCode::kParse,
                      detail::where(path, line) + ": missing header line {\"model_name\",\"dim\"}");
        }
        set.model_name = obj.at("model_name").get<std::string>();
        if (obj.contains("dim")) {
          set.dim = obj["dim"].get<std::size_t>();
          header_dim = true;
        }
      },
      [&](std::size_t line, const json& obj) {
        const std::string at = detail::where(path, line);
        auto id = obj.at("user_id").get<std::string>();
        if (id.empty()) throw Error(ErrorCode::kParse, at + ": empty user_id");
        const json& values = obj.at("vector");
        if (!values.is_array()) throw Error(ErrorCode::kParse, at + ": vector must be an array");
        std::vector<float> vec;
        vec.reserve(values.size());
        for (const auto& v : values) {
          if (!v.is_number()) {
            throw Error(ErrorCode::kParse, at + ": non-numeric value (NaN/Inf are not allowed)");
          }
          const double d = v.get<double>();
          const auto f = static_cast<float>(d);
          if (!std::isfinite(d) || !std::isfinite(f)) {
            throw Error(ErrorCode::kParse, at + ": non-finite value");
          }
          vec.push_back(f);
        }
        if (!header_dim && set.entries.empty()) set.dim = vec.size();
        if (vec.size() != set.dim || vec.empty()) {
          throw Error(ErrorCode::kDimensionMismatch,
                      at + ": vector has " + std::to_string(vec.size()) +
                          " values, expected dim " + std::to_string(set.dim));
        }
        if (!set.entries.emplace(std::move(id), std::move(vec)).second) {
          throw Error(ErrorCode::kParse, at + ": duplicate user_id");
        }
      });
  if (set.entries.empty()) {
    throw Error(ErrorCode::kEmptyDataset, path.string() + ": no embedding records");
  }
  return set;
}

void write_embeddings(const std::filesystem::path& path, const EmbeddingSet& set) {
  auto out = detail::open_output(path);
  out << json{{"model_name", set.model_name}, {"dim", set.dim}}.dump() << '\n';
  for (const auto& [id, vec] : set.entries) {
    if (vec.size() != set.dim) {
      throw Error(ErrorCode::kDimensionMismatch, "embedding for " + id + " has wrong length");
    }
    // Written by hand so every value carries exactly 9 significant digits.
    out << "{\"user_id\":" << json(id).dump() << ",\"vector\":[";
    for (std::size_t i = 0; i < vec.size(); ++i) {
      if (!std::isfinite(vec[i])) {
        throw Error(ErrorCode::kInvalidArgument, "non-finite embedding value for " + id);
      }
      if (i) out << ',';
      out << format_float(vec[i]);
    }
    out << "]}\n";
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

ScoreSet load_scores(const std::filesystem::path& path) {
  ScoreSet set;
  read_contract(
      path,
      [&](std::size_t line, const json& obj) {
        if (obj.contains("user_id")) {
          throw Error(ErrorCode::kParse,
                      detail::where(path, line) + ": missing header line {\"model_name\"}");
        }
        set.model_name = obj.at("model_name").get<std::string>();
      },
      [&](std::size_t line, const json& obj) {
        const std::string at = detail::where(path, line);
        auto id = obj.at("user_id").get<std::string>();
        const json& p = obj.at("p_diagnosed");
        if (!p.is_number()) throw Error(ErrorCode::kParse, at + ": p_diagnosed must be a number");
        const double v = p.get<double>();
        if (!(v >= 0.0 && v <= 1.0)) {
          throw Error(ErrorCode::kParse, at + ": p_diagnosed outside [0, 1]");
        }
        if (!set.entries.emplace(std::move(id), v).second) {
          throw Error(ErrorCode::kParse, at + ": duplicate user_id");
        }
      });
  if (set.entries.empty()) {
    throw Error(ErrorCode::kEmptyDataset, path.string() + ": no score records");
  }
  return set;
}

void write_scores(const std::filesystem::path& path, const ScoreSet& set) {
  auto out = detail::open_output(path);
  out << json{{"model_name", set.model_name}}.dump() << '\n';
  for (const auto& [id, p] : set.entries) {
    out << json{{"user_id", id}, {"p_diagnosed", p}}.dump() << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

}  // namespace mhscreen
