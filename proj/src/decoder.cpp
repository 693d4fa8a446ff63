#include "speechee/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>

#include "speechee/error.hpp"

namespace speechee {

EntityDictionary::EntityDictionary() { entries_.push_back({}); }

EntityDictionary::EntityDictionary(std::vector<std::vector<std::string>> entries) {
  entries_.push_back({});
  std::map<std::string, bool> seen;
  for (auto& e : entries) {
    if (e.empty()) throw Error("entity dictionary: empty entry");
    std::string key = join_tokens(e);
    if (seen.count(key)) throw Error("entity dictionary: duplicate entry '" + key + "'");
    seen[key] = true;
    entries_.push_back(std::move(e));
  }
}

std::size_t EntityDictionary::index_of(const std::vector<std::string>& mention) const {
  for (std::size_t j = 1; j < entries_.size(); ++j) {
    if (entries_[j] == mention) return j;
  }
  return 0;
}

void EntityDictionary::save_text(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  for (std::size_t j = 1; j < entries_.size(); ++j) {
    out << join_tokens(entries_[j]) << '\n';
  }
}

EntityDictionary EntityDictionary::load_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  std::vector<std::vector<std::string>> entries;
  std::string line;
  while (std::getline(in, line)) {
    auto words = split_tokens(line);
    if (!words.empty()) entries.push_back(std::move(words));
  }
  return EntityDictionary(std::move(entries));
}

EntityDictionary build_entity_dictionary(const std::vector<RecordSet>& train_records) {
  std::map<std::string, int> counts;
  std::map<std::string, std::vector<std::string>> mention_by_key;
  for (const auto& rs : train_records) {
    for (const auto& rec : rs.records) {
      for (const auto& [role, mention] : rec.arguments) {
        std::string key = join_tokens(mention);
        ++counts[key];
        mention_by_key[key] = mention;
      }
    }
  }
  std::vector<std::vector<std::string>> entries;
  for (const auto& [key, count] : counts) {  // std::map iterates sorted
    if (count == 1) entries.push_back(mention_by_key[key]);
  }
  return EntityDictionary(std::move(entries));
}

DictionaryEncoder::DictionaryEncoder(nn::ParamStore& ps, const std::string& prefix,
                                     const Vocab& vocab, const DecoderConfig& cfg)
    : vocab_(&vocab),
      token_embed_(ps.create_normal(prefix + ".embed", vocab.size(), cfg.ed_embed_dim, 0.1)),
      sentinel_(ps.create_normal(prefix + ".sentinel", 1, cfg.att_dim, 0.1)),
      lstm_(ps, prefix + ".lstm", cfg.ed_embed_dim, cfg.att_dim) {}

nn::Var DictionaryEncoder::operator()(const EntityDictionary& dict) const {
  std::vector<nn::Var> rows;
  rows.push_back(sentinel_);
  for (std::size_t j = 1; j < dict.size(); ++j) {
    std::vector<int> ids = vocab_->encode(dict.entry(j));
    nn::Var seq = nn::gather_rows(token_embed_, ids);
    rows.push_back(lstm_.last_state(seq));
  }
  return nn::concat_rows(rows);
}

RetrievalHead::RetrievalHead(nn::ParamStore& ps, const std::string& prefix,
                             const DecoderConfig& cfg)
    : wq_(ps.create(prefix + ".wq", cfg.model_dim, cfg.att_dim)),
      wk_(ps.create(prefix + ".wk", cfg.att_dim, cfg.att_dim)),
      att_dim_(cfg.att_dim) {}

RetrievalDistribution RetrievalHead::operator()(const nn::Var& decoder_states,
                                                const nn::Var& dict_encoding) const {
  if (decoder_states.cols() != wq_.rows())
    throw Error("retrieval: decoder state width mismatch");
  if (dict_encoding.cols() != wk_.rows())
    throw Error("retrieval: dictionary encoding width mismatch");
  nn::Var q = nn::matmul(decoder_states, wq_);
  nn::Var k = nn::matmul(dict_encoding, wk_);
  nn::Var alpha =
      nn::scale(nn::matmul(q, nn::transpose(k)), 1.0 / std::sqrt(double(att_dim_)));
  return RetrievalDistribution{alpha, nn::softmax_rows(alpha)};
}

nn::Var retrieval_loss(const nn::Var& p, const std::vector<int>& gold_indices) {
  for (std::size_t u = 0; u < gold_indices.size(); ++u) {
    int g = gold_indices[u];
    if (g < 0 || g >= p.cols())
      throw Error("retrieval_loss: gold index out of range at step " + std::to_string(u));
    if (p.value()(static_cast<Eigen::Index>(u), g) <= 0.0) {
      std::cerr << "[speechee] warning: zero retrieval probability for gold entity at step "
                << u << ", clamping\n";
    }
  }
  return nn::nll_rows(p, gold_indices, 1e-12);
}

StructureDecoder::StructureDecoder(nn::ParamStore& ps, const std::string& prefix,
                                   const Vocab& vocab, const DecoderConfig& cfg)
    : vocab_(&vocab), cfg_(cfg) {
  token_embed_ = ps.create_normal(prefix + ".embed", vocab.size(), cfg.model_dim, 0.1);
  for (int i = 0; i < cfg.layers; ++i) {
    layers_.emplace_back(ps, prefix + ".layer" + std::to_string(i), cfg.model_dim,
                         cfg.heads, static_cast<Eigen::Index>(cfg.ffn_mult) * cfg.model_dim);
  }
  final_ln_ = nn::LayerNormParams(ps, prefix + ".final_ln", cfg.model_dim);
  out_w_ = ps.create(prefix + ".out.w", cfg.model_dim, vocab.size());
  out_b_ = ps.create_zeros(prefix + ".out.b", 1, vocab.size());
}

StructureDecoder::Forward StructureDecoder::operator()(
    const nn::Var& memory, const std::vector<int>& input_ids) const {
  if (input_ids.empty()) throw Error("decoder: empty input");
  nn::Var x = nn::gather_rows(token_embed_, input_ids);
  x = nn::add_const(x, nn::sinusoidal_positions(x.rows(), x.cols()));
  nn::Matrix mask = nn::causal_mask(x.rows());
  for (const auto& layer : layers_) x = layer(x, memory, mask);
  nn::Var states = final_ln_(x);
  nn::Var logits = nn::add_rowvec(nn::matmul(states, out_w_), out_b_);
  return Forward{states, logits};
}

StructureDecoder::Step StructureDecoder::decode_step(
    const nn::Var& memory, const std::vector<int>& prefix_ids) const {
  nn::GradGuard no_grad(false);
  Forward fwd = (*this)(memory, prefix_ids);
  Step step;
  step.state = fwd.states.value().row(fwd.states.rows() - 1);
  step.logits = fwd.logits.value().row(fwd.logits.rows() - 1);
  return step;
}

EmitAction emit(const Eigen::RowVectorXd& masked_logits,
                const Eigen::RowVectorXd& retrieval_p, const EmitPolicy& policy,
                bool at_mention_start) {
  if (at_mention_start && policy.retrieval_enabled && retrieval_p.size() > 1) {
    Eigen::Index best = 0;
    double best_p = -1.0;
    for (Eigen::Index j = 1; j < retrieval_p.size(); ++j) {
      if (retrieval_p(j) > best_p) {
        best_p = retrieval_p(j);
        best = j;
      }
    }
    if (best_p > retrieval_p(0) && best_p > policy.threshold) {
      EmitAction a;
      a.kind = EmitAction::kRetrieve;
      a.entity = static_cast<std::size_t>(best);
      return a;
    }
  }
  Eigen::Index arg = 0;
  masked_logits.maxCoeff(&arg);
  EmitAction a;
  a.kind = EmitAction::kGenerate;
  a.token_id = static_cast<int>(arg);
  return a;
}

std::vector<int> derive_gold_entity_indices(const std::vector<std::string>& target_tokens,
                                            const EntityDictionary& dict) {
  std::vector<int> gold(target_tokens.size(), 0);
  // Argument mentions sit between a role token and its closing paren; role
  // tokens follow a "(" that is nested two levels inside the record set.
  int depth = 0;
  for (std::size_t i = 0; i < target_tokens.size(); ++i) {
    const auto& tok = target_tokens[i];
    if (tok == "(") {
      ++depth;
      // depth 3 block: "( ROLE word... )" — mention starts at i + 2
      if (depth == 3 && i + 2 < target_tokens.size()) {
        std::size_t start = i + 2;
        std::size_t end = start;
        while (end < target_tokens.size() && target_tokens[end] != ")" &&
               target_tokens[end] != "(") {
          ++end;
        }
        std::vector<std::string> mention(target_tokens.begin() + start,
                                         target_tokens.begin() + end);
        if (!mention.empty()) {
          std::size_t j = dict.index_of(mention);
          if (j != 0) gold[start] = static_cast<int>(j);
        }
      }
    } else if (tok == ")") {
      --depth;
    }
  }
  return gold;
}

}  // namespace speechee
