#include "mhscreen/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <nlohmann/json.hpp>
#include <unordered_set>

#include "csv.hpp"
#include "io_util.hpp"
#include "mhscreen/error.hpp"
#include "mhscreen/rng.hpp"
#include "mhscreen/utf8.hpp"

namespace mhscreen {

using nlohmann::json;

std::string_view to_string(Label label) {
  return label == Label::kDiagnosed ? "diagnosed" : "control";
}

std::string_view to_string(Source source) {
  return source == Source::kTweetsMerged ? "tweets_merged" : "bio";
}

std::string_view to_string(InputFormat format) {
  return format == InputFormat::kCsv ? "csv" : "jsonl";
}

Label parse_label(std::string_view text) {
  if (text == "diagnosed") return Label::kDiagnosed;
  if (text == "control") return Label::kControl;
  throw Error(ErrorCode::kSchema,
              "unknown label '" + std::string(text) + "' (expected diagnosed or control)");
}

Source parse_source(std::string_view text) {
  if (text == "tweets_merged" || text == "tweets") return Source::kTweetsMerged;
  if (text == "bio" || text == "bios") return Source::kBio;
  throw Error(ErrorCode::kConfiguration,
              "unknown source '" + std::string(text) + "' (expected tweets_merged or bio)");
}

InputFormat parse_input_format(std::string_view text) {
  if (text == "csv") return InputFormat::kCsv;
  if (text == "jsonl") return InputFormat::kJsonl;
  throw Error(ErrorCode::kConfiguration,
              "unknown input format '" + std::string(text) + "' (expected csv or jsonl)");
}

Dataset::Dataset(Source source, std::vector<Document> documents, std::size_t omitted_users)
    : source_(source), documents_(std::move(documents)), omitted_(omitted_users) {
  std::unordered_set<std::string_view> ids;
  for (const Document& doc : documents_) {
    if (doc.user_id.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "document with empty user_id");
    }
    if (doc.text.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "document for " + doc.user_id + " has empty text");
    }
    if (doc.source != source_) {
      throw Error(ErrorCode::kInvalidArgument,
                  "document for " + doc.user_id + " has source " +
                      std::string(to_string(doc.source)) + ", dataset holds " +
                      std::string(to_string(source_)));
    }
    if (!ids.insert(doc.user_id).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate user_id " + doc.user_id);
    }
    (doc.label == Label::kDiagnosed ? diagnosed_ : control_)++;
  }
}

void SplitSpec::validate() const {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorCode::kConfiguration, "train_fraction must lie in (0, 1), got " +
                                               std::to_string(train_fraction));
  }
}

namespace {

struct UserRow {
  std::size_t line;
  std::string user_id;
  std::optional<std::string> label;
  std::string bio;
};

struct TweetRow {
  std::size_t line;
  std::string user_id;
  std::string text;
};

void check_utf8(const std::filesystem::path& path, std::size_t line, std::string_view field) {
  if (auto bad = utf8::find_invalid(field)) {
    throw Error(ErrorCode::kSchema, detail::where(path, line) +
                                        ": invalid UTF-8 at byte " + std::to_string(*bad));
  }
}

std::size_t column(const std::vector<std::string>& header, std::string_view name) {
  auto it = std::find(header.begin(), header.end(), name);
  return it == header.end() ? header.size() : static_cast<std::size_t>(it - header.begin());
}

bool blank_row(const detail::CsvRow& row) {
  return row.fields.size() == 1 && row.fields[0].empty();
}

std::vector<UserRow> read_user_rows_csv(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  detail::CsvReader reader(in);
  detail::CsvRow row;
  if (!reader.next(row)) return {};
  const auto header = row.fields;
  const std::size_t id_col = column(header, "user_id");
  const std::size_t label_col = column(header, "label");
  const std::size_t bio_col = column(header, "bio");
  if (id_col == header.size() || label_col == header.size()) {
    throw Error(ErrorCode::kSchema,
                path.string() + ": header must contain user_id and label (user_id,label,bio)");
  }
  std::vector<UserRow> rows;
  while (reader.next(row)) {
    if (blank_row(row)) continue;
    if (row.fields.size() != header.size()) {
      throw Error(ErrorCode::kSchema, detail::where(path, row.line) + ": expected " +
                                          std::to_string(header.size()) + " fields, got " +
                                          std::to_string(row.fields.size()));
    }
    for (const auto& f : row.fields) check_utf8(path, row.line, f);
    UserRow u{row.line, row.fields[id_col], row.fields[label_col], {}};
    if (bio_col != header.size()) u.bio = row.fields[bio_col];
    rows.push_back(std::move(u));
  }
  return rows;
}

std::vector<TweetRow> read_tweet_rows_csv(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  detail::CsvReader reader(in);
  detail::CsvRow row;
  if (!reader.next(row)) return {};
  const auto header = row.fields;
  const std::size_t id_col = column(header, "user_id");
  const std::size_t text_col = column(header, "text");
  if (id_col == header.size() || text_col == header.size()) {
    throw Error(ErrorCode::kSchema, path.string() + ": header must be user_id,text");
  }
  std::vector<TweetRow> rows;
  while (reader.next(row)) {
    if (blank_row(row)) continue;
    if (row.fields.size() != header.size()) {
      throw Error(ErrorCode::kSchema, detail::where(path, row.line) + ": expected " +
                                          std::to_string(header.size()) + " fields, got " +
                                          std::to_string(row.fields.size()));
    }
    for (const auto& f : row.fields) check_utf8(path, row.line, f);
    rows.push_back({row.line, row.fields[id_col], row.fields[text_col]});
  }
  return rows;
}

// Calls fn(line_number, object) for each non-blank line.
template <typename Fn>
void for_each_json_line(const std::filesystem::path& path, Fn&& fn) {
  auto in = detail::open_input(path);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    detail::chomp(line);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    check_utf8(path, number, line);
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kSchema, detail::where(path, number) + ": " + e.what());
    }
    if (!obj.is_object()) {
      throw Error(ErrorCode::kSchema, detail::where(path, number) + ": expected a JSON object");
    }
    fn(number, obj);
  }
}

std::optional<std::string> string_field(const std::filesystem::path& path, std::size_t line,
                                        const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) {
    throw Error(ErrorCode::kSchema,
                detail::where(path, line) + ": field '" + key + "' must be a string");
  }
  return it->get<std::string>();
}

std::vector<UserRow> read_user_rows_jsonl(const std::filesystem::path& path) {
  std::vector<UserRow> rows;
  for_each_json_line(path, [&](std::size_t line, const json& obj) {
    UserRow u{line, string_field(path, line, obj, "user_id").value_or(""),
              string_field(path, line, obj, "label"),
              string_field(path, line, obj, "bio").value_or("")};
    rows.push_back(std::move(u));
  });
  return rows;
}

std::vector<TweetRow> read_tweet_rows_jsonl(const std::filesystem::path& path) {
  std::vector<TweetRow> rows;
  for_each_json_line(path, [&](std::size_t line, const json& obj) {
    rows.push_back({line, string_field(path, line, obj, "user_id").value_or(""),
                    string_field(path, line, obj, "text").value_or("")});
  });
  return rows;
}

bool is_blank(std::string_view s) {
  return s.find_first_not_of(" \t\r\n") == std::string_view::npos;
}

}  // namespace

std::vector<UserRecord> load_users(const std::filesystem::path& users_path,
                                   const std::optional<std::filesystem::path>& tweets_path,
                                   InputFormat format) {
  const auto user_rows = format == InputFormat::kCsv ? read_user_rows_csv(users_path)
                                                     : read_user_rows_jsonl(users_path);
  if (user_rows.empty()) {
    throw Error(ErrorCode::kEmptyDataset, users_path.string() + ": no user rows");
  }

  std::map<std::string, UserRecord> users;
  for (const UserRow& row : user_rows) {
    const std::string at = detail::where(users_path, row.line);
    if (row.user_id.empty()) throw Error(ErrorCode::kSchema, at + ": empty user_id");
    if (!row.label || row.label->empty()) {
      throw Error(ErrorCode::kSchema, at + ": missing label");
    }
    Label label;
    try {
      label = parse_label(*row.label);
    } catch (const Error& e) {
      throw Error(ErrorCode::kSchema, at + ": " + e.what());
    }
    auto [it, inserted] = users.try_emplace(row.user_id);
    UserRecord& user = it->second;
    if (inserted) {
      user.user_id = row.user_id;
      user.label = label;
    } else if (user.label != label) {
      throw Error(ErrorCode::kSchema, at + ": conflicting label for user " + row.user_id);
    }
    if (!row.bio.empty()) {
      if (user.bio && *user.bio != row.bio) {
        throw Error(ErrorCode::kSchema, at + ": conflicting bio for user " + row.user_id);
      }
      user.bio = row.bio;
    }
  }

  if (tweets_path) {
    const auto tweet_rows = format == InputFormat::kCsv ? read_tweet_rows_csv(*tweets_path)
                                                        : read_tweet_rows_jsonl(*tweets_path);
    if (tweet_rows.empty()) {
      throw Error(ErrorCode::kEmptyDataset, tweets_path->string() + ": no tweet rows");
    }
    for (const TweetRow& row : tweet_rows) {
      auto it = users.find(row.user_id);
      if (it == users.end()) {
        throw Error(ErrorCode::kSchema, detail::where(*tweets_path, row.line) +
                                            ": tweet for unknown user '" + row.user_id + "'");
      }
      it->second.tweets.push_back(row.text);
    }
  }

  std::vector<UserRecord> out;
  out.reserve(users.size());
  for (auto& [id, user] : users) out.push_back(std::move(user));
  return out;
}

Dataset build_documents(std::span<const UserRecord> users, Source source) {
  if (users.empty()) throw Error(ErrorCode::kEmptyDataset, "no users to build documents from");
  std::vector<Document> docs;
  std::size_t omitted = 0;
  for (const UserRecord& user : users) {
    std::string text;
    if (source == Source::kBio) {
      if (user.bio && !is_blank(*user.bio)) text = *user.bio;
    } else {
      for (std::size_t i = 0; i < user.tweets.size(); ++i) {
        if (i) text.push_back('\n');
        text += user.tweets[i];
      }
      if (is_blank(text)) text.clear();
    }
    if (text.empty()) {
      ++omitted;
      continue;
    }
    docs.push_back({user.user_id, user.label, source, std::move(text)});
  }
  if (docs.empty()) {
    throw Error(ErrorCode::kEmptyDataset,
                "no user has a non-empty " + std::string(to_string(source)) + " document");
  }
  return Dataset(source, std::move(docs), omitted);
}

namespace {

// round(fraction * n) clamped so both sides keep at least one item.
std::size_t train_count(std::size_t n, double fraction) {
  auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  return std::clamp<std::size_t>(count, 1, n - 1);
}

}  // namespace

std::pair<Dataset, Dataset> train_test_split(const Dataset& dataset, const SplitSpec& spec) {
  spec.validate();
  const auto docs = dataset.documents();
  Rng rng(spec.seed);
  std::vector<bool> in_train(docs.size(), false);

  if (spec.stratified) {
    for (Label label : {Label::kDiagnosed, Label::kControl}) {
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < docs.size(); ++i) {
        if (docs[i].label == label) members.push_back(i);
      }
      if (members.size() < 2) {
        throw Error(ErrorCode::kStratification,
                    "class " + std::string(to_string(label)) + " has " +
                        std::to_string(members.size()) +
                        " document(s); stratified splitting needs at least 2");
      }
      rng.shuffle(std::span(members));
      const std::size_t take = train_count(members.size(), spec.train_fraction);
      for (std::size_t i = 0; i < take; ++i) in_train[members[i]] = true;
    }
  } else {
    if (docs.size() < 2) {
      throw Error(ErrorCode::kStratification, "splitting needs at least 2 documents");
    }
    std::vector<std::size_t> order(docs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(std::span(order));
    const std::size_t take = train_count(docs.size(), spec.train_fraction);
    for (std::size_t i = 0; i < take; ++i) in_train[order[i]] = true;
  }

  std::vector<Document> train, test;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    (in_train[i] ? train : test).push_back(docs[i]);
  }
  return {Dataset(dataset.source(), std::move(train)),
          Dataset(dataset.source(), std::move(test))};
}

void write_documents_jsonl(const std::filesystem::path& path,
                           std::span<const Document> documents) {
  auto out = detail::open_output(path);
  for (const Document& doc : documents) {
    json obj = {{"user_id", doc.user_id},
                {"label", to_string(doc.label)},
                {"source", to_string(doc.source)},
                {"text", doc.text}};
    out << obj.dump() << '\n';
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed: " + path.string());
}

std::vector<Document> read_documents_jsonl(const std::filesystem::path& path) {
  std::vector<Document> docs;
  for_each_json_line(path, [&](std::size_t line, const json& obj) {
    try {
      docs.push_back({obj.at("user_id").get<std::string>(),
                      parse_label(obj.at("label").get<std::string>()),
                      parse_source(obj.at("source").get<std::string>()),
                      obj.at("text").get<std::string>()});
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kSchema, detail::where(path, line) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::kSchema, detail::where(path, line) + ": " + e.what());
    }
  });
  return docs;
}

}  // namespace mhscreen
