#include <gtest/gtest.h>

#include "taxind/llm/protocol.hpp"

using namespace taxind;
using namespace taxind::llm;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::ConfigError;
}

}  // namespace

TEST(ExtractJson, ToleratesFencesAndProse) {
  auto j = extract_json_object("Sure! Here you go:\n```json\n{\"answer\": \"yes\"}\n```\nAnything else?");
  EXPECT_EQ(j["answer"], "yes");
}

TEST(ExtractJson, SkipsBracesInsideStringsAndBrokenCandidates) {
  auto j = extract_json_object("note {not json} then {\"definition\": \"a {curly} thing \\\" quoted\"}");
  EXPECT_EQ(j["definition"], "a {curly} thing \" quoted");
}

TEST(ExtractJson, NoObjectIsParseError) {
  EXPECT_EQ(code_of([] { extract_json_object("yes"); }), ErrorCode::ParseError);
  EXPECT_EQ(code_of([] { extract_json_object("{\"a\": }"); }), ErrorCode::ParseError);
}

TEST(ParseJudgment, Variants) {
  EXPECT_TRUE(parse_judgment("```json\n{\"answer\":\"yes\"}\n```"));
  EXPECT_FALSE(parse_judgment("{\"answer\": \"No\"}"));
  EXPECT_TRUE(parse_judgment("{\"answer\": true}"));
  EXPECT_EQ(code_of([] { parse_judgment("{\"answer\": \"maybe\"}"); }), ErrorCode::SchemaError);
  EXPECT_EQ(code_of([] { parse_judgment("{\"reply\": \"yes\"}"); }), ErrorCode::SchemaError);
  EXPECT_EQ(code_of([] { parse_judgment("{\"answer\": \"yes\", \"why\": \"x\"}"); }), ErrorCode::SchemaError);
}

TEST(ParseRanking, ClampsAndChecksVocabulary) {
  Vocabulary vocab{"mammal", "animal"};
  auto parsed = parse_ranking(R"({"parents":[{"parent":"mammal","score":1.0},{"parent":"animal","score":0}]})", vocab);
  ASSERT_EQ(parsed.size(), 2u);
  EXPECT_EQ(parsed[0].score, 1.0 - kScoreEpsilon);
  EXPECT_EQ(parsed[1].score, kScoreEpsilon);
  EXPECT_EQ(code_of([&] { parse_ranking(R"({"parents":[{"parent":"unicorn","score":0.5}]})", vocab); }),
            ErrorCode::VocabularyError);
  EXPECT_EQ(code_of([&] { parse_ranking(R"({"parents":[{"parent":"mammal"}]})", vocab); }), ErrorCode::SchemaError);
}

TEST(ParsePenalties, ClampedToHalf) {
  auto parsed = parse_penalties(R"({"penalties":[{"parent":"a","penalty":0.9},{"parent":"b","penalty":-0.2}]})",
                                Vocabulary{"a", "b"});
  EXPECT_EQ(parsed.at("a"), 0.5);
  EXPECT_EQ(parsed.at("b"), 0.0);
}

TEST(ParseDefinition, HardCapAndSingleParagraph) {
  std::string words;
  for (int i = 0; i < 150; ++i) words += "w" + std::to_string(i) + " ";
  auto d = parse_definition("{\"definition\": \"" + words + "\"}", 100);
  EXPECT_EQ(split_words(d).size(), 100u);
  EXPECT_EQ(parse_definition("{\"definition\": \"two\\n\\nparagraphs\"}", 100), "two paragraphs");
  EXPECT_EQ(code_of([] { parse_definition("{\"definition\": \"   \"}", 100); }), ErrorCode::SchemaError);
}

TEST(ParseStructured, DispatchesOnSchema) {
  ParseOptions opts;
  opts.vocabulary = {"x"};
  EXPECT_TRUE(std::get<bool>(parse_structured("{\"answer\":\"yes\"}", ResponseSchema::isa_judgment, opts)));
  auto penalties = std::get<std::map<std::string, double>>(
      parse_structured(R"({"penalties":[{"parent":"x","penalty":0.9}]})", ResponseSchema::penalty, opts));
  EXPECT_EQ(penalties.at("x"), 0.5);
}

TEST(Digest, IndependentOfContextKeyOrder) {
  ChatRequest a;
  a.user_prompt = "u";
  a.context = json::parse(R"({"stage":"isa","query":"dog","anchor":"animal"})");
  ChatRequest b = a;
  b.context = json::parse(R"({"anchor":"animal","query":"dog","stage":"isa"})");
  EXPECT_EQ(digest(a), digest(b));
  b.user_prompt = "v";
  EXPECT_NE(digest(a), digest(b));
}

TEST(ChatRequestJson, RoundTrip) {
  ChatRequest a;
  a.model_id = "m";
  a.system_prompt = "s";
  a.user_prompt = "u";
  a.schema = ResponseSchema::rank_and_score;
  a.context = json{{"child", "dog"}};
  a.seed = 7;
  auto b = chat_request_from_json(to_json(a));
  EXPECT_EQ(digest(a), digest(b));
}
