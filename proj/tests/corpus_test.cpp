#include "mhscreen/corpus.hpp"

#include <gtest/gtest.h>

#include <functional>
#include <set>

#include "mhscreen/error.hpp"
#include "test_support.hpp"

namespace mhscreen {
namespace {

using testing::TempDir;
using testing::write_file;

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no mhscreen::Error thrown";
  return ErrorCode::kInvalidArgument;
}

TEST(Corpus, GroupsTweetsByUserInFileOrder) {
  TempDir dir;
  write_file(dir / "users.csv", "user_id,label,bio\nu2,control,likes tea\nu1,diagnosed,\n");
  write_file(dir / "tweets.csv", "user_id,text\nu1,a\nu2,x\nu1,b\n");
  const auto users = load_users(dir / "users.csv", dir / "tweets.csv", InputFormat::kCsv);
  ASSERT_EQ(users.size(), 2u);
  EXPECT_EQ(users[0].user_id, "u1");
  EXPECT_EQ(users[0].tweets, (std::vector<std::string>{"a", "b"}));
  EXPECT_FALSE(users[0].bio);
  EXPECT_EQ(users[1].bio, "likes tea");
  EXPECT_EQ(users[1].label, Label::kControl);
}

TEST(Corpus, JsonlMatchesCsv) {
  TempDir dir;
  write_file(dir / "users.csv", "user_id,label,bio\nu1,diagnosed,\"so, tired\"\nu2,control,\n");
  write_file(dir / "tweets.csv", "user_id,text\nu1,\"line one\"\nu2,hello\n");
  write_file(dir / "users.jsonl",
             "{\"user_id\":\"u1\",\"label\":\"diagnosed\",\"bio\":\"so, tired\"}\n"
             "{\"user_id\":\"u2\",\"label\":\"control\"}\n");
  write_file(dir / "tweets.jsonl",
             "{\"user_id\":\"u1\",\"text\":\"line one\"}\n{\"user_id\":\"u2\",\"text\":\"hello\"}\n");
  EXPECT_EQ(load_users(dir / "users.csv", dir / "tweets.csv", InputFormat::kCsv),
            load_users(dir / "users.jsonl", dir / "tweets.jsonl", InputFormat::kJsonl));
}

TEST(Corpus, RowOrderDoesNotMatter) {
  TempDir dir;
  write_file(dir / "a.csv", "user_id,label,bio\nu1,diagnosed,x\nu2,control,y\nu3,control,z\n");
  write_file(dir / "b.csv", "user_id,label,bio\nu3,control,z\nu1,diagnosed,x\nu2,control,y\n");
  EXPECT_EQ(load_users(dir / "a.csv", std::nullopt, InputFormat::kCsv),
            load_users(dir / "b.csv", std::nullopt, InputFormat::kCsv));
}

TEST(Corpus, SchemaErrors) {
  TempDir dir;
  write_file(dir / "nolabel.csv", "user_id,label,bio\nu1,,x\n");
  write_file(dir / "badlabel.csv", "user_id,label,bio\nu1,sad,x\n");
  write_file(dir / "conflict.csv", "user_id,label,bio\nu1,control,x\nu1,diagnosed,x\n");
  write_file(dir / "header.csv", "id,label\nu1,control\n");
  write_file(dir / "empty.csv", "user_id,label,bio\n");
  write_file(dir / "users.csv", "user_id,label,bio\nu1,control,x\n");
  write_file(dir / "orphan.csv", "user_id,text\nu9,hello\n");
  write_file(dir / "badutf8.csv", "user_id,label,bio\nu1,control,\xFF\n");
  auto load = [&](const char* name) {
    load_users(dir / name, std::nullopt, InputFormat::kCsv);
  };
  EXPECT_EQ(code_of([&] { load("nolabel.csv"); }), ErrorCode::kSchema);
  EXPECT_EQ(code_of([&] { load("badlabel.csv"); }), ErrorCode::kSchema);
  EXPECT_EQ(code_of([&] { load("conflict.csv"); }), ErrorCode::kSchema);
  EXPECT_EQ(code_of([&] { load("header.csv"); }), ErrorCode::kSchema);
  EXPECT_EQ(code_of([&] { load("empty.csv"); }), ErrorCode::kEmptyDataset);
  EXPECT_EQ(code_of([&] { load("badutf8.csv"); }), ErrorCode::kSchema);
  EXPECT_EQ(code_of([&] {
              load_users(dir / "users.csv", dir / "orphan.csv", InputFormat::kCsv);
            }),
            ErrorCode::kSchema);
  EXPECT_EQ(code_of([&] { load("missing.csv"); }), ErrorCode::kIo);
}

TEST(Corpus, SchemaErrorNamesTheLine) {
  TempDir dir;
  write_file(dir / "users.csv", "user_id,label,bio\nu1,control,x\nu2,maybe,y\n");
  try {
    load_users(dir / "users.csv", std::nullopt, InputFormat::kCsv);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("users.csv:3"), std::string::npos) << e.what();
  }
}

TEST(Corpus, MergesTweetsWithNewlines) {
  const std::vector<UserRecord> users = {{"u1", Label::kDiagnosed, std::nullopt, {"a", "b"}}};
  const Dataset ds = build_documents(users, Source::kTweetsMerged);
  ASSERT_EQ(ds.size(), 1u);
  EXPECT_EQ(ds.documents()[0].text, "a\nb");
}

TEST(Corpus, UsersWithoutSourceAreOmitted) {
  const std::vector<UserRecord> users = {{"u1", Label::kDiagnosed, "bio one", {}},
                                         {"u2", Label::kControl, std::nullopt, {"t"}},
                                         {"u3", Label::kControl, "  ", {"t"}}};
  const Dataset bios = build_documents(users, Source::kBio);
  EXPECT_EQ(bios.size(), 1u);
  EXPECT_EQ(bios.omitted_users(), 2u);
  const Dataset tweets = build_documents(users, Source::kTweetsMerged);
  EXPECT_EQ(tweets.size(), 2u);
  EXPECT_EQ(tweets.omitted_users(), 1u);
  EXPECT_EQ(tweets.class_count(Label::kControl), 2u);
}

TEST(Corpus, DatasetRejectsDuplicatesAndMixedSources) {
  EXPECT_THROW(Dataset(Source::kBio, {{"a", Label::kControl, Source::kBio, "x"},
                                      {"a", Label::kControl, Source::kBio, "y"}}),
               Error);
  EXPECT_THROW(Dataset(Source::kBio, {{"a", Label::kControl, Source::kTweetsMerged, "x"}}),
               Error);
  EXPECT_THROW(Dataset(Source::kBio, {{"a", Label::kControl, Source::kBio, ""}}), Error);
}

Dataset make_dataset(std::size_t diagnosed, std::size_t control) {
  std::vector<Document> docs;
  for (std::size_t i = 0; i < diagnosed + control; ++i) {
    docs.push_back({"u" + std::to_string(i), i < diagnosed ? Label::kDiagnosed : Label::kControl,
                    Source::kBio, "text"});
  }
  return Dataset(Source::kBio, std::move(docs));
}

TEST(Corpus, StratifiedSplitKeepsRatiosAndOrder) {
  const Dataset ds = make_dataset(40, 60);
  const auto [train, test] = train_test_split(ds, {0.8, 5, true});
  EXPECT_EQ(train.size(), 80u);
  EXPECT_EQ(train.class_count(Label::kDiagnosed), 32u);
  EXPECT_EQ(test.class_count(Label::kDiagnosed), 8u);
  std::set<std::string> ids;
  for (const auto* part : {&train, &test}) {
    std::string previous;
    for (const auto& d : part->documents()) {
      ids.insert(d.user_id);
      // Input order is kept: ids are "u<i>" with increasing i.
      if (!previous.empty()) {
        EXPECT_LT(std::stoi(previous.substr(1)), std::stoi(d.user_id.substr(1)));
      }
      previous = d.user_id;
    }
  }
  EXPECT_EQ(ids.size(), 100u);
}

TEST(Corpus, SplitIsDeterministicPerSeed) {
  const Dataset ds = make_dataset(30, 30);
  const auto a = train_test_split(ds, {0.8, 1, true});
  const auto b = train_test_split(ds, {0.8, 1, true});
  const auto c = train_test_split(ds, {0.8, 2, true});
  auto ids = [](const Dataset& d) {
    std::vector<std::string> out;
    for (const auto& doc : d.documents()) out.push_back(doc.user_id);
    return out;
  };
  EXPECT_EQ(ids(a.first), ids(b.first));
  EXPECT_NE(ids(a.first), ids(c.first));
}

TEST(Corpus, SplitErrors) {
  EXPECT_EQ(code_of([] { train_test_split(make_dataset(1, 10), {0.8, 0, true}); }),
            ErrorCode::kStratification);
  EXPECT_EQ(code_of([] { train_test_split(make_dataset(5, 5), {1.0, 0, true}); }),
            ErrorCode::kConfiguration);
  // Unstratified splitting tolerates a single-member class.
  EXPECT_NO_THROW(train_test_split(make_dataset(1, 10), {0.8, 0, false}));
}

TEST(Corpus, DocumentsJsonlRoundTrip) {
  TempDir dir;
  const std::vector<Document> docs = {{"u1", Label::kDiagnosed, Source::kTweetsMerged, "a\nb \"q\""},
                                      {"u2", Label::kControl, Source::kTweetsMerged, "caf\xC3\xA9"}};
  write_documents_jsonl(dir / "docs.jsonl", docs);
  EXPECT_EQ(read_documents_jsonl(dir / "docs.jsonl"), docs);
}

TEST(Corpus, EnumSpellings) {
  EXPECT_EQ(parse_label("diagnosed"), Label::kDiagnosed);
  EXPECT_EQ(parse_source("tweets_merged"), Source::kTweetsMerged);
  EXPECT_EQ(parse_source("bio"), Source::kBio);
  EXPECT_EQ(parse_input_format("jsonl"), InputFormat::kJsonl);
  EXPECT_THROW(parse_input_format("xml"), Error);
}

}  // namespace
}  // namespace mhscreen
