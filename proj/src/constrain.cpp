#include "speechee/constrain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "speechee/error.hpp"

namespace speechee {

int TrieState::paren_depth() const {
  switch (pos) {
    case kStart:
    case kDone:
      return 0;
    case kRecBoundary:
      return 1;
    default:
      return 2;
  }
}

std::vector<std::string> allowed_tokens(const TrieState& state,
                                        const ConstraintVocab& vocab) {
  const EventSchema& schema = *vocab.schema;
  std::vector<std::string> out;
  switch (state.pos) {
    case TrieState::kStart:
      out.push_back("(");
      break;
    case TrieState::kRecBoundary:
      out.push_back("(");
      out.push_back(")");
      break;
    case TrieState::kType:
      out = schema.event_types();
      break;
    case TrieState::kTriggerWords: {
      if (!state.mention_locked) {
        out = vocab.mention_words;
      }
      if (state.mention_words >= 1) {
        if (!schema.roles_of(state.current_type).empty()) out.push_back("(");
        out.push_back(")");
      }
      break;
    }
    case TrieState::kArgOrClose:
      if (!schema.roles_of(state.current_type).empty()) out.push_back("(");
      out.push_back(")");
      break;
    case TrieState::kRole:
      out = schema.roles_of(state.current_type);
      break;
    case TrieState::kArgWords: {
      if (!state.mention_locked) {
        out = vocab.mention_words;
      }
      if (state.mention_words >= 1) out.push_back(")");
      break;
    }
    case TrieState::kDone:
      break;
  }
  return out;
}

TrieState advance(const TrieState& state, const std::string& token,
                  const ConstraintVocab& vocab) {
  auto allowed = allowed_tokens(state, vocab);
  if (std::find(allowed.begin(), allowed.end(), token) == allowed.end())
    throw Error("constraint violation: token '" + token + "' not allowed here");
  TrieState next = state;
  switch (state.pos) {
    case TrieState::kStart:
      next.pos = TrieState::kRecBoundary;
      break;
    case TrieState::kRecBoundary:
      if (token == "(") {
        next.pos = TrieState::kType;
      } else {
        next.pos = TrieState::kDone;
      }
      break;
    case TrieState::kType:
      next.pos = TrieState::kTriggerWords;
      next.current_type = token;
      next.mention_words = 0;
      next.mention_locked = false;
      break;
    case TrieState::kTriggerWords:
      if (token == "(") {
        next.pos = TrieState::kRole;
      } else if (token == ")") {
        next.pos = TrieState::kRecBoundary;
        next.current_type.clear();
      } else {
        ++next.mention_words;
      }
      break;
    case TrieState::kArgOrClose:
      if (token == "(") {
        next.pos = TrieState::kRole;
      } else {
        next.pos = TrieState::kRecBoundary;
        next.current_type.clear();
      }
      break;
    case TrieState::kRole:
      next.pos = TrieState::kArgWords;
      next.mention_words = 0;
      next.mention_locked = false;
      break;
    case TrieState::kArgWords:
      if (token == ")") {
        next.pos = TrieState::kArgOrClose;
        next.mention_words = 0;
        next.mention_locked = false;
      } else {
        ++next.mention_words;
      }
      break;
    case TrieState::kDone:
      throw Error("constraint violation: generation past final state");
  }
  return next;
}

int min_close_len(const TrieState& state) {
  switch (state.pos) {
    case TrieState::kStart:
      return 2;  // ( )
    case TrieState::kRecBoundary:
      return 1;  // )
    case TrieState::kType:
      return 4;  // TYPE word ) )
    case TrieState::kTriggerWords:
      return state.mention_words >= 1 ? 2 : 3;
    case TrieState::kArgOrClose:
      return 2;  // ) )
    case TrieState::kRole:
      return 5;  // ROLE word ) ) )
    case TrieState::kArgWords:
      return state.mention_words >= 1 ? 3 : 4;
    case TrieState::kDone:
      return 0;
  }
  return 0;
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

std::vector<std::string> constrained_generate(const StepFn& step, const Vocab& vocab,
                                              const ConstraintVocab& cvocab,
                                              const EntityDictionary& dict,
                                              const GenerateOptions& opts) {
  if (opts.max_len < 2) throw Error("constrained_generate: max_len must be >= 2");
  TrieState state;
  std::vector<std::string> out;
  std::vector<int> prefix = {Vocab::kBos};

  while (!state.done() && static_cast<int>(out.size()) < opts.max_len) {
    const int remaining = opts.max_len - static_cast<int>(out.size());
    StepScores scores = step(prefix);
    if (!scores.logits.allFinite())
      throw Error("constrained_generate: model produced non-finite logits");

    // retrieval splice at argument-mention starts
    if (state.at_arg_mention_start() && scores.retrieval_p.size() > 1) {
      EmitAction action = emit(Eigen::RowVectorXd::Zero(vocab.size()),
                               scores.retrieval_p, opts.policy, true);
      if (action.kind == EmitAction::kRetrieve) {
        const auto& entry = dict.entry(action.entity);
        bool ok = static_cast<int>(entry.size()) + 3 <= remaining;
        for (const auto& w : entry) {
          if (!vocab.has(w) ||
              std::find(cvocab.mention_words.begin(), cvocab.mention_words.end(), w) ==
                  cvocab.mention_words.end()) {
            ok = false;
          }
        }
        if (ok) {
          for (const auto& w : entry) {
            state = advance(state, w, cvocab);
            out.push_back(w);
            prefix.push_back(vocab.id(w));
          }
          state.mention_locked = true;  // mention complete; only ")" may follow
          continue;
        }
      }
    }

    // grammar + budget mask, then greedy argmax
    Eigen::RowVectorXd masked = Eigen::RowVectorXd::Constant(vocab.size(), kNegInf);
    bool any = false;
    for (const auto& tok : allowed_tokens(state, cvocab)) {
      TrieState next = advance(state, tok, cvocab);
      if (min_close_len(next) <= remaining - 1) {
        masked(vocab.id(tok)) = scores.logits(vocab.id(tok));
        any = true;
      }
    }
    if (!any)
      throw Error("constrained_generate: no grammar-admissible token fits the budget");
    EmitAction action = emit(masked, Eigen::RowVectorXd(), opts.policy, false);
    const std::string& tok = vocab.token(action.token_id);
    state = advance(state, tok, cvocab);
    out.push_back(tok);
    prefix.push_back(action.token_id);
  }
  return out;
}

std::vector<std::string> unconstrained_generate(const StepFn& step, const Vocab& vocab,
                                                int max_len) {
  std::vector<std::string> out;
  std::vector<int> prefix = {Vocab::kBos};
  for (int i = 0; i < max_len; ++i) {
    StepScores scores = step(prefix);
    if (!scores.logits.allFinite())
      throw Error("unconstrained_generate: model produced non-finite logits");
    Eigen::RowVectorXd logits = scores.logits;
    logits(Vocab::kPad) = kNegInf;
    logits(Vocab::kBos) = kNegInf;
    Eigen::Index arg = 0;
    logits.maxCoeff(&arg);
    if (arg == Vocab::kEos) break;
    out.push_back(vocab.token(static_cast<int>(arg)));
    prefix.push_back(static_cast<int>(arg));
  }
  return out;
}

}  // namespace speechee
