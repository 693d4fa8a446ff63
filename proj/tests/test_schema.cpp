#include "speechee/schema.hpp"

#include <random>

#include "doctest.h"
#include "speechee/error.hpp"
#include "test_util.hpp"

using namespace speechee;

namespace {

RecordSet one_attack_record() {
  RecordSet rs;
  EventRecord rec;
  rec.event_type = "Attack";
  rec.trigger = {"fired"};
  rec.arguments.emplace_back("Attacker", std::vector<std::string>{"the", "soldiers"});
  rs.records.push_back(rec);
  return rs;
}

}  // namespace

TEST_CASE("linearize grammar cases") {
  EventSchema schema = testutil::small_schema();

  CHECK(linearize_text(RecordSet{}, schema) == "( )");
  CHECK(linearize_text(one_attack_record(), schema) ==
        "( ( Attack fired ( Attacker the soldiers ) ) )");

  RecordSet two = one_attack_record();
  EventRecord meet;
  meet.event_type = "Meet";
  meet.trigger = {"met"};
  two.records.push_back(meet);
  CHECK(linearize_text(two, schema) ==
        "( ( Attack fired ( Attacker the soldiers ) ) ( Meet met ) )");
}

TEST_CASE("linearize rejects schema violations naming the record") {
  EventSchema schema = testutil::small_schema();
  RecordSet rs = one_attack_record();
  rs.records[0].arguments.emplace_back("Destination", std::vector<std::string>{"x"});
  CHECK_THROWS_WITH_AS(linearize(rs, schema),
                       doctest::Contains("record 0"), ValidationError);

  RecordSet no_trigger;
  no_trigger.records.push_back({"Attack", {}, {}});
  CHECK_THROWS_AS(linearize(no_trigger, schema), ValidationError);
}

TEST_CASE("strict parse inverts linearize") {
  EventSchema schema = testutil::small_schema();
  auto tokens = split_tokens("( ( Attack fired ( Attacker the soldiers ) ) )");
  ParseResult r = parse(tokens, schema, ParseMode::kStrict);
  CHECK(r.records == one_attack_record());
  CHECK(parse(split_tokens("( )"), schema, ParseMode::kStrict).records == RecordSet{});
}

TEST_CASE("strict parse errors carry token positions") {
  EventSchema schema = testutil::small_schema();
  CHECK_THROWS_WITH_AS(parse(split_tokens("( ( Attack fired"), schema, ParseMode::kStrict),
                       doctest::Contains("unbalanced"), ParseError);
  CHECK_THROWS_AS(parse(split_tokens("( ( BadType x ) )"), schema, ParseMode::kStrict),
                  ParseError);
  CHECK_THROWS_AS(
      parse(split_tokens("( ( Attack fired ( Destination x ) ) )"), schema,
            ParseMode::kStrict),
      ParseError);  // role not in Attack's role set
  CHECK_THROWS_AS(parse(split_tokens("( ( Attack ( Attacker x ) ) )"), schema,
                        ParseMode::kStrict),
                  ParseError);  // empty trigger
  CHECK_THROWS_AS(parse(std::vector<std::string>{}, schema, ParseMode::kStrict),
                  ParseError);
}

TEST_CASE("lenient parse keeps valid blocks and counts drops") {
  EventSchema schema = testutil::small_schema();
  ParseResult r = parse(split_tokens("( ( BadType x ) ( Attack fired ) )"), schema,
                        ParseMode::kLenient);
  REQUIRE(r.records.size() == 1);
  CHECK(r.records.records[0].event_type == "Attack");
  CHECK(r.dropped == 1);

  // unbalanced garbage never throws in lenient mode
  ParseResult r2 = parse(split_tokens("( ( Attack fired"), schema, ParseMode::kLenient);
  CHECK(r2.records.empty());
  CHECK(r2.dropped >= 1);
}

TEST_CASE("normalize lowercases mentions only and is idempotent") {
  EventSchema schema = testutil::small_schema();
  RecordSet rs;
  EventRecord rec;
  rec.event_type = "Attack";
  rec.trigger = {"Fired"};
  rec.arguments.emplace_back("Attacker", std::vector<std::string>{"The", "Soldiers"});
  rs.records.push_back(rec);

  RecordSet n = normalize(rs);
  CHECK(n.records[0].trigger[0] == "fired");
  CHECK(n.records[0].arguments[0].second == std::vector<std::string>{"the", "soldiers"});
  CHECK(n.records[0].event_type == "Attack");
  CHECK(normalize(n) == n);
  CHECK(n.size() == rs.size());
  (void)schema;
}

TEST_CASE("roundtrip property over random record sets") {
  EventSchema schema = testutil::small_schema();
  auto words = testutil::word_pool();
  std::mt19937_64 rng(7);
  for (int i = 0; i < 1000; ++i) {
    RecordSet rs = testutil::random_record_set(rng, schema, words);
    auto tokens = linearize(rs, schema);
    ParseResult strict = parse(tokens, schema, ParseMode::kStrict);
    CHECK(strict.records == rs);
    // lenient mode agrees with strict on strict-parseable input
    ParseResult lenient = parse(tokens, schema, ParseMode::kLenient);
    CHECK(lenient.records == rs);
    CHECK(lenient.dropped == 0);
    // normalize preserves count and is idempotent
    RecordSet n = normalize(rs);
    CHECK(n.size() == rs.size());
    CHECK(normalize(n) == n);
  }
}

TEST_CASE("schema loading underscores multiword labels and validates") {
  EventSchema s = EventSchema::from_json_text(
      R"({"event_types":["Start Position"],"roles":{"Start Position":["New Role"]}})");
  CHECK(s.has_type("Start_Position"));
  CHECK(s.has_role("Start_Position", "New_Role"));
  CHECK_THROWS_AS(EventSchema::from_json_text(R"({"event_types":["A","A"]})"),
                  ValidationError);
  CHECK_THROWS_AS(EventSchema::from_json_text(R"({"roles":{}})"), ValidationError);
}

TEST_CASE("jsonl exchange roundtrip") {
  LabeledRecordSet l{"clip-1", one_attack_record()};
  std::string line = labeled_to_jsonl_line(l);
  CHECK(line.find("\"id\"") != std::string::npos);
  std::string path = "test_schema_rows.jsonl";
  save_jsonl({l}, path);
  auto rows = load_jsonl(path);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].id == "clip-1");
  CHECK(rows[0].records == l.records);
  std::remove(path.c_str());
}
