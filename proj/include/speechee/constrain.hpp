#ifndef SPEECHEE_CONSTRAIN_HPP_
#define SPEECHEE_CONSTRAIN_HPP_

#include <functional>
#include <string>
#include <vector>

#include "speechee/decoder.hpp"
#include "speechee/schema.hpp"
#include "speechee/vocab.hpp"

namespace speechee {

// Candidate vocabulary partitions for the grammar automaton.
struct ConstraintVocab {
  const EventSchema* schema = nullptr;
  std::vector<std::string> mention_words;  // defaults to the full word vocabulary
};

// Position in the record grammar. The automaton accepts exactly the strict-
// parseable strings for the schema.
struct TrieState {
  enum Position {
    kStart,         // before the opening "("
    kRecBoundary,   // inside RS, between records / before the final ")"
    kType,          // expecting an event type label
    kTriggerWords,  // inside a record, emitting trigger words
    kArgOrClose,    // after a closed ARG block
    kRole,          // expecting a role label
    kArgWords,      // emitting argument mention words
    kDone,          // absorbing final state
  };
  Position pos = kStart;
  std::string current_type;  // set while inside a record
  int mention_words = 0;     // words emitted in the current mention
  bool mention_locked = false;  // a spliced mention is complete; no more words

  // RS/REC nesting depth: 0 outside, 1 in RS, 2 in a REC.
  int paren_depth() const;
  bool done() const { return pos == kDone; }
  bool at_arg_mention_start() const { return pos == kArgWords && mention_words == 0; }
  bool at_mention_start() const {
    return (pos == kArgWords || pos == kTriggerWords) && mention_words == 0;
  }

  bool operator==(const TrieState&) const = default;
};

// Exactly the tokens keeping the prefix extendable to a strict-parseable
// string. Empty at kDone.
std::vector<std::string> allowed_tokens(const TrieState& state,
                                        const ConstraintVocab& vocab);

// Deterministic transition; throws on a token not in allowed_tokens(state).
TrieState advance(const TrieState& state, const std::string& token,
                  const ConstraintVocab& vocab);

// Fewest tokens from `state` to kDone.
int min_close_len(const TrieState& state);

// One decoding step's scores, supplied by the caller per prefix.
struct StepScores {
  Eigen::RowVectorXd logits;       // over the full token vocabulary
  Eigen::RowVectorXd retrieval_p;  // over dictionary entries; empty = disabled
};
using StepFn = std::function<StepScores(const std::vector<int>& prefix_ids)>;

struct GenerateOptions {
  int max_len = 48;
  EmitPolicy policy;
};

// Greedy argmax restricted to grammar-allowed tokens, with a remaining-length
// budget so every output closes within max_len and strict-parses. Dictionary
// splices are consulted at argument-mention starts.
std::vector<std::string> constrained_generate(const StepFn& step, const Vocab& vocab,
                                              const ConstraintVocab& cvocab,
                                              const EntityDictionary& dict,
                                              const GenerateOptions& opts);

// Unconstrained greedy baseline: argmax over real tokens until EOS/max_len.
std::vector<std::string> unconstrained_generate(const StepFn& step, const Vocab& vocab,
                                                int max_len);

}  // namespace speechee

#endif  // SPEECHEE_CONSTRAIN_HPP_
