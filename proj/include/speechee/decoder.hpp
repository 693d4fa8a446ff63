#ifndef SPEECHEE_DECODER_HPP_
#define SPEECHEE_DECODER_HPP_

#include <string>
#include <vector>

#include "speechee/nn/layers.hpp"
#include "speechee/schema.hpp"
#include "speechee/vocab.hpp"

namespace speechee {

// Closed entity list with the no-entity sentinel at index 0.
class EntityDictionary {
 public:
  EntityDictionary();  // just the sentinel
  explicit EntityDictionary(std::vector<std::vector<std::string>> entries);

  // index 0 is the sentinel (empty token sequence)
  std::size_t size() const { return entries_.size(); }
  const std::vector<std::string>& entry(std::size_t j) const { return entries_.at(j); }
  // 0 when the mention is not in the dictionary
  std::size_t index_of(const std::vector<std::string>& mention) const;

  void save_text(const std::string& path) const;  // one entry per line, e0 implicit
  static EntityDictionary load_text(const std::string& path);

 private:
  std::vector<std::vector<std::string>> entries_;
};

// Argument mentions whose global count over the training records is exactly
// one, sorted lexicographically. Trigger mentions never enter.
EntityDictionary build_entity_dictionary(const std::vector<RecordSet>& train_records);

struct DecoderConfig {
  int model_dim = 48;
  int layers = 2;
  int heads = 4;
  int ffn_mult = 3;
  int att_dim = 32;     // retrieval attention dimension
  int ed_embed_dim = 32;  // entity token embedding width
};

// Encodes dictionary entries with an LSTM over entity-token embeddings; the
// sentinel row comes from a dedicated learned embedding.
class DictionaryEncoder {
 public:
  DictionaryEncoder() = default;
  DictionaryEncoder(nn::ParamStore& ps, const std::string& prefix, const Vocab& vocab,
                    const DecoderConfig& cfg);
  // (l+1) x att_dim
  nn::Var operator()(const EntityDictionary& dict) const;

 private:
  const Vocab* vocab_ = nullptr;
  nn::Var token_embed_;
  nn::Var sentinel_;
  nn::Lstm lstm_;
};

struct RetrievalDistribution {
  nn::Var alpha;  // steps x (l+1) raw scores
  nn::Var p;      // softmax over entries per step
};

// Scaled dot-product retrieval attention over the encoded dictionary.
class RetrievalHead {
 public:
  RetrievalHead() = default;
  RetrievalHead(nn::ParamStore& ps, const std::string& prefix, const DecoderConfig& cfg);
  RetrievalDistribution operator()(const nn::Var& decoder_states,
                                   const nn::Var& dict_encoding) const;

 private:
  nn::Var wq_, wk_;
  int att_dim_ = 0;
};

// Negative log likelihood of the per-step golden entity indices, summed over
// steps. Probabilities are clamped at 1e-12 (a zero-probability gold emits a
// warning to stderr once per call site).
nn::Var retrieval_loss(const nn::Var& p, const std::vector<int>& gold_indices);

// Autoregressive structure decoder: causal self-attention over emitted
// tokens, cross-attention over (shrunk) speech states.
class StructureDecoder {
 public:
  StructureDecoder() = default;
  StructureDecoder(nn::ParamStore& ps, const std::string& prefix, const Vocab& vocab,
                   const DecoderConfig& cfg);

  struct Forward {
    nn::Var states;  // L x d decoder hidden states
    nn::Var logits;  // L x V generation logits
  };
  // input_ids: BOS-prefixed token ids (length L >= 1)
  Forward operator()(const nn::Var& memory, const std::vector<int>& input_ids) const;

  // Single decoding step over the current prefix; returns the last state row
  // and its generation logits.
  struct Step {
    Eigen::RowVectorXd state;
    Eigen::RowVectorXd logits;
  };
  Step decode_step(const nn::Var& memory, const std::vector<int>& prefix_ids) const;

  int vocab_size() const { return vocab_ ? vocab_->size() : 0; }

 private:
  const Vocab* vocab_ = nullptr;
  DecoderConfig cfg_;
  nn::Var token_embed_;
  std::vector<nn::DecoderLayer> layers_;
  nn::LayerNormParams final_ln_;
  nn::Var out_w_, out_b_;
};

struct EmitPolicy {
  double threshold = 0.5;  // retrieval splice confidence gate
  bool retrieval_enabled = true;
};

struct EmitAction {
  enum Kind { kGenerate, kRetrieve } kind = kGenerate;
  int token_id = -1;      // kGenerate
  std::size_t entity = 0;  // kRetrieve: dictionary index >= 1
};

// Decides between generating the argmax token and splicing a dictionary
// entity. Retrieval is consulted only when at_mention_start is set; the
// policy requires the best non-sentinel probability to beat both the
// sentinel and the threshold.
EmitAction emit(const Eigen::RowVectorXd& masked_logits,
                const Eigen::RowVectorXd& retrieval_p, const EmitPolicy& policy,
                bool at_mention_start);

// Per-step golden entity indices for a linearized target: the dictionary
// index at each argument-mention start whose full mention equals that entry,
// sentinel (0) everywhere else. Aligned with the target token sequence.
std::vector<int> derive_gold_entity_indices(const std::vector<std::string>& target_tokens,
                                            const EntityDictionary& dict);

}  // namespace speechee

#endif  // SPEECHEE_DECODER_HPP_
