#include "speechee/schema.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "speechee/error.hpp"

namespace speechee {

namespace {

std::string underscore_join(const std::string& label) {
  std::string out = label;
  for (char& c : out) {
    if (std::isspace(static_cast<unsigned char>(c))) c = '_';
  }
  return out;
}

std::string mention_text(const std::vector<std::string>& words) {
  return join_tokens(words);
}

}  // namespace

EventSchema::EventSchema(std::vector<std::string> event_types,
                         std::map<std::string, std::vector<std::string>> roles_by_type)
    : event_types_(std::move(event_types)), roles_by_type_(std::move(roles_by_type)) {
  for (auto& t : event_types_) t = underscore_join(t);
  std::map<std::string, std::vector<std::string>> fixed;
  for (auto& [type, roles] : roles_by_type_) {
    auto key = underscore_join(type);
    auto& out = fixed[key];
    for (const auto& r : roles) out.push_back(underscore_join(r));
  }
  roles_by_type_ = std::move(fixed);
  validate();
}

void EventSchema::validate() const {
  std::set<std::string> seen;
  for (const auto& t : event_types_) {
    if (t.empty()) throw ValidationError("schema: empty event type label");
    if (!seen.insert(t).second)
      throw ValidationError("schema: duplicate event type '" + t + "'");
  }
  for (const auto& [type, roles] : roles_by_type_) {
    if (!seen.count(type))
      throw ValidationError("schema: roles given for unknown type '" + type + "'");
    std::set<std::string> role_seen;
    for (const auto& r : roles) {
      if (r.empty()) throw ValidationError("schema: empty role label in '" + type + "'");
      if (!role_seen.insert(r).second)
        throw ValidationError("schema: duplicate role '" + r + "' in type '" + type + "'");
    }
  }
}

const std::vector<std::string>& EventSchema::roles_of(const std::string& type) const {
  static const std::vector<std::string> kEmpty;
  auto it = roles_by_type_.find(type);
  return it == roles_by_type_.end() ? kEmpty : it->second;
}

bool EventSchema::has_type(const std::string& type) const {
  return std::find(event_types_.begin(), event_types_.end(), type) != event_types_.end();
}

bool EventSchema::has_role(const std::string& type, const std::string& role) const {
  const auto& roles = roles_of(type);
  return std::find(roles.begin(), roles.end(), role) != roles.end();
}

EventSchema EventSchema::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("schema: bad JSON: ") + e.what());
  }
  if (!j.contains("event_types") || !j["event_types"].is_array())
    throw ValidationError("schema: missing 'event_types' array");
  std::vector<std::string> types = j["event_types"].get<std::vector<std::string>>();
  std::map<std::string, std::vector<std::string>> roles;
  if (j.contains("roles")) {
    for (auto it = j["roles"].begin(); it != j["roles"].end(); ++it) {
      roles[it.key()] = it.value().get<std::vector<std::string>>();
    }
  }
  return EventSchema(std::move(types), std::move(roles));
}

EventSchema EventSchema::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("schema: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::string EventSchema::to_json_text() const {
  nlohmann::json j;
  j["event_types"] = event_types_;
  nlohmann::json roles = nlohmann::json::object();
  for (const auto& [t, rs] : roles_by_type_) roles[t] = rs;
  j["roles"] = roles;
  return j.dump();
}

void validate_record_set(const RecordSet& rs, const EventSchema& schema) {
  for (std::size_t i = 0; i < rs.records.size(); ++i) {
    const auto& rec = rs.records[i];
    auto where = "record " + std::to_string(i) + " (type '" + rec.event_type + "')";
    if (!schema.has_type(rec.event_type))
      throw ValidationError(where + ": unknown event type");
    if (rec.trigger.empty())
      throw ValidationError(where + ": empty trigger mention");
    for (const auto& w : rec.trigger)
      if (w.empty()) throw ValidationError(where + ": empty trigger word");
    for (const auto& [role, mention] : rec.arguments) {
      if (!schema.has_role(rec.event_type, role))
        throw ValidationError(where + ": role '" + role + "' not in type's role set");
      if (mention.empty())
        throw ValidationError(where + ": empty mention for role '" + role + "'");
      for (const auto& w : mention)
        if (w.empty()) throw ValidationError(where + ": empty mention word");
    }
  }
}

std::vector<std::string> linearize(const RecordSet& rs, const EventSchema& schema) {
  validate_record_set(rs, schema);
  std::vector<std::string> out;
  out.push_back("(");
  for (const auto& rec : rs.records) {
    out.push_back("(");
    out.push_back(rec.event_type);
    for (const auto& w : rec.trigger) out.push_back(w);
    for (const auto& [role, mention] : rec.arguments) {
      out.push_back("(");
      out.push_back(role);
      for (const auto& w : mention) out.push_back(w);
      out.push_back(")");
    }
    out.push_back(")");
  }
  out.push_back(")");
  return out;
}

std::string linearize_text(const RecordSet& rs, const EventSchema& schema) {
  return join_tokens(linearize(rs, schema));
}

namespace {

bool is_structural(const std::string& t) { return t == "(" || t == ")"; }

// Strict REC parser over tokens[pos..]; pos sits on the opening "(".
// Returns the record and leaves pos one past the closing ")".
EventRecord parse_record(const std::vector<std::string>& tokens, std::size_t& pos,
                         const EventSchema& schema) {
  if (pos >= tokens.size() || tokens[pos] != "(")
    throw ParseError("expected '(' to open a record", pos);
  ++pos;
  if (pos >= tokens.size()) throw ParseError("unbalanced parentheses", pos);
  EventRecord rec;
  rec.event_type = tokens[pos];
  if (is_structural(rec.event_type))
    throw ParseError("expected event type label", pos);
  if (!schema.has_type(rec.event_type))
    throw ParseError("unknown event type '" + rec.event_type + "'", pos);
  ++pos;
  while (pos < tokens.size() && !is_structural(tokens[pos])) {
    rec.trigger.push_back(tokens[pos]);
    ++pos;
  }
  if (rec.trigger.empty()) throw ParseError("empty trigger mention", pos);
  while (pos < tokens.size() && tokens[pos] == "(") {
    ++pos;
    if (pos >= tokens.size()) throw ParseError("unbalanced parentheses", pos);
    std::string role = tokens[pos];
    if (is_structural(role)) throw ParseError("expected role label", pos);
    if (!schema.has_role(rec.event_type, role))
      throw ParseError("role '" + role + "' not in role set of '" + rec.event_type + "'",
                       pos);
    ++pos;
    std::vector<std::string> mention;
    while (pos < tokens.size() && !is_structural(tokens[pos])) {
      mention.push_back(tokens[pos]);
      ++pos;
    }
    if (mention.empty()) throw ParseError("empty mention", pos);
    if (pos >= tokens.size() || tokens[pos] != ")")
      throw ParseError("unbalanced parentheses", pos);
    ++pos;
    rec.arguments.emplace_back(std::move(role), std::move(mention));
  }
  if (pos >= tokens.size() || tokens[pos] != ")")
    throw ParseError("unbalanced parentheses", pos);
  ++pos;
  return rec;
}

RecordSet parse_strict(const std::vector<std::string>& tokens, const EventSchema& schema) {
  std::size_t pos = 0;
  if (tokens.empty() || tokens[0] != "(")
    throw ParseError("expected '(' to open the record set", 0);
  ++pos;
  RecordSet rs;
  while (pos < tokens.size() && tokens[pos] == "(") {
    rs.records.push_back(parse_record(tokens, pos, schema));
  }
  if (pos >= tokens.size() || tokens[pos] != ")")
    throw ParseError("unbalanced parentheses", pos);
  ++pos;
  if (pos != tokens.size()) throw ParseError("trailing tokens after record set", pos);
  return rs;
}

// Finds the index one past the ")" matching tokens[open] == "(", or npos.
std::size_t matching_close(const std::vector<std::string>& tokens, std::size_t open) {
  int depth = 0;
  for (std::size_t i = open; i < tokens.size(); ++i) {
    if (tokens[i] == "(") ++depth;
    if (tokens[i] == ")") {
      --depth;
      if (depth == 0) return i + 1;
    }
  }
  return std::string::npos;
}

ParseResult parse_lenient(const std::vector<std::string>& tokens,
                          const EventSchema& schema) {
  ParseResult result;
  // Candidate REC blocks are balanced "("-groups one level inside the outer
  // parens (or at top level when the outer parens are themselves damaged).
  std::size_t begin = 0, end = tokens.size();
  if (!tokens.empty() && tokens.front() == "(" &&
      matching_close(tokens, 0) == tokens.size()) {
    begin = 1;
    end = tokens.size() - 1;
  }
  std::size_t pos = begin;
  while (pos < end) {
    if (tokens[pos] != "(") {
      // stray token outside any block
      ++pos;
      ++result.dropped;
      while (pos < end && tokens[pos] != "(") ++pos;
      continue;
    }
    std::size_t close = matching_close(tokens, pos);
    if (close == std::string::npos || close > end) {
      ++result.dropped;
      break;
    }
    std::vector<std::string> block(tokens.begin() + pos, tokens.begin() + close);
    try {
      std::size_t p = 0;
      EventRecord rec = parse_record(block, p, schema);
      if (p == block.size()) {
        result.records.records.push_back(std::move(rec));
      } else {
        ++result.dropped;
      }
    } catch (const ParseError&) {
      ++result.dropped;
    }
    pos = close;
  }
  return result;
}

}  // namespace

ParseResult parse(const std::vector<std::string>& tokens, const EventSchema& schema,
                  ParseMode mode) {
  if (mode == ParseMode::kStrict) {
    return ParseResult{parse_strict(tokens, schema), 0};
  }
  return parse_lenient(tokens, schema);
}

RecordSet normalize(const RecordSet& rs) {
  RecordSet out = rs;
  auto lower = [](std::vector<std::string>& words) {
    for (auto& w : words)
      for (char& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  };
  for (auto& rec : out.records) {
    lower(rec.trigger);
    for (auto& [role, mention] : rec.arguments) lower(mention);
  }
  return out;
}

std::vector<std::string> split_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream ss(text);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

namespace {

nlohmann::json record_to_json_obj(const EventRecord& rec) {
  nlohmann::json jr;
  jr["type"] = rec.event_type;
  jr["trigger"] = mention_text(rec.trigger);
  nlohmann::json args = nlohmann::json::array();
  for (const auto& [role, mention] : rec.arguments) {
    args.push_back(nlohmann::json::array({role, mention_text(mention)}));
  }
  jr["args"] = args;
  return jr;
}

EventRecord record_from_json_obj(const nlohmann::json& jr) {
  EventRecord rec;
  rec.event_type = jr.at("type").get<std::string>();
  rec.trigger = split_tokens(jr.at("trigger").get<std::string>());
  if (jr.contains("args")) {
    for (const auto& a : jr.at("args")) {
      rec.arguments.emplace_back(a.at(0).get<std::string>(),
                                 split_tokens(a.at(1).get<std::string>()));
    }
  }
  return rec;
}

}  // namespace

std::string record_set_to_json(const RecordSet& rs) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& rec : rs.records) arr.push_back(record_to_json_obj(rec));
  return arr.dump();
}

RecordSet record_set_from_json(const std::string& text) {
  RecordSet rs;
  nlohmann::json arr = nlohmann::json::parse(text);
  for (const auto& jr : arr) rs.records.push_back(record_from_json_obj(jr));
  return rs;
}

std::string labeled_to_jsonl_line(const LabeledRecordSet& l) {
  nlohmann::json j;
  j["id"] = l.id;
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& rec : l.records.records) arr.push_back(record_to_json_obj(rec));
  j["records"] = arr;
  return j.dump();
}

std::vector<LabeledRecordSet> load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  std::vector<LabeledRecordSet> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      nlohmann::json j = nlohmann::json::parse(line);
      LabeledRecordSet l;
      l.id = j.at("id").get<std::string>();
      for (const auto& jr : j.at("records")) {
        l.records.records.push_back(record_from_json_obj(jr));
      }
      rows.push_back(std::move(l));
    } catch (const nlohmann::json::exception& e) {
      throw Error(path + ": line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

void save_jsonl(const std::vector<LabeledRecordSet>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  for (const auto& l : rows) out << labeled_to_jsonl_line(l) << '\n';
}

}  // namespace speechee
