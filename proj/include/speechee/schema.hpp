#ifndef SPEECHEE_SCHEMA_HPP_
#define SPEECHEE_SCHEMA_HPP_

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace speechee {

// Closed sets of event types and the argument roles each type admits.
// Labels are single whitespace-free tokens; multiword labels are
// underscore-joined when a schema file is loaded.
class EventSchema {
 public:
  EventSchema() = default;
  EventSchema(std::vector<std::string> event_types,
              std::map<std::string, std::vector<std::string>> roles_by_type);

  static EventSchema from_json_file(const std::string& path);
  static EventSchema from_json_text(const std::string& text);
  std::string to_json_text() const;

  const std::vector<std::string>& event_types() const { return event_types_; }
  const std::vector<std::string>& roles_of(const std::string& type) const;
  bool has_type(const std::string& type) const;
  bool has_role(const std::string& type, const std::string& role) const;

 private:
  void validate() const;
  std::vector<std::string> event_types_;
  std::map<std::string, std::vector<std::string>> roles_by_type_;
};

// One extracted event: type label, trigger mention and role/argument pairs.
// Roles may repeat (multiple fillers for the same role).
struct EventRecord {
  std::string event_type;
  std::vector<std::string> trigger;  // >= 1 word
  std::vector<std::pair<std::string, std::vector<std::string>>> arguments;

  bool operator==(const EventRecord&) const = default;
};

struct RecordSet {
  std::vector<EventRecord> records;

  bool empty() const { return records.empty(); }
  std::size_t size() const { return records.size(); }
  bool operator==(const RecordSet&) const = default;
};

// Throws ValidationError naming the offending record.
void validate_record_set(const RecordSet& rs, const EventSchema& schema);

// RS := "(" REC* ")" ; REC := "(" TYPE TRIGGER_WORD+ ARG* ")" ;
// ARG := "(" ROLE WORD+ ")". Tokens are whitespace separated.
std::vector<std::string> linearize(const RecordSet& rs, const EventSchema& schema);
std::string linearize_text(const RecordSet& rs, const EventSchema& schema);

enum class ParseMode { kStrict, kLenient };

struct ParseResult {
  RecordSet records;
  std::size_t dropped = 0;  // malformed/invalid REC blocks discarded (lenient only)
};

// Strict mode throws ParseError on any grammar or schema violation.
// Lenient mode keeps maximal well-formed REC blocks and drops the rest.
ParseResult parse(const std::vector<std::string>& tokens, const EventSchema& schema,
                  ParseMode mode);

// Lowercases every mention; type and role labels untouched. Idempotent.
RecordSet normalize(const RecordSet& rs);

std::vector<std::string> split_tokens(const std::string& text);
std::string join_tokens(const std::vector<std::string>& tokens);

// JSONL exchange: one object per clip,
// {"id": str, "records": [{"type","trigger","args":[[role,mention],...]}]}.
struct LabeledRecordSet {
  std::string id;
  RecordSet records;
};

std::string record_set_to_json(const RecordSet& rs);
RecordSet record_set_from_json(const std::string& text);
std::string labeled_to_jsonl_line(const LabeledRecordSet& l);
std::vector<LabeledRecordSet> load_jsonl(const std::string& path);
void save_jsonl(const std::vector<LabeledRecordSet>& rows, const std::string& path);

}  // namespace speechee

#endif  // SPEECHEE_SCHEMA_HPP_
