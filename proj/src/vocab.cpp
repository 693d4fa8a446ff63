#include "speechee/vocab.hpp"

#include <algorithm>
#include <set>

#include "speechee/error.hpp"

namespace speechee {

Vocab::Vocab(const EventSchema& schema, const std::vector<std::string>& words) {
  tokens_ = {"<pad>", "<bos>", "<eos>", "(", ")"};
  for (const auto& t : schema.event_types()) tokens_.push_back(t);
  std::set<std::string> seen_roles;
  for (const auto& t : schema.event_types()) {
    for (const auto& r : schema.roles_of(t)) {
      if (seen_roles.insert(r).second) tokens_.push_back(r);
    }
  }
  std::vector<std::string> sorted_words = words;
  std::sort(sorted_words.begin(), sorted_words.end());
  sorted_words.erase(std::unique(sorted_words.begin(), sorted_words.end()),
                     sorted_words.end());
  for (const auto& w : sorted_words) {
    if (std::find(tokens_.begin(), tokens_.end(), w) != tokens_.end())
      throw Error("vocab: word '" + w + "' collides with a label or structural token");
    tokens_.push_back(w);
    words_.push_back(w);
  }
  for (int i = 0; i < static_cast<int>(tokens_.size()); ++i) ids_[tokens_[i]] = i;
}

Vocab Vocab::from_tokens(const std::vector<std::string>& tokens,
                         const std::vector<std::string>& words) {
  Vocab v;
  v.tokens_ = tokens;
  v.words_ = words;
  for (int i = 0; i < static_cast<int>(tokens.size()); ++i) v.ids_[tokens[i]] = i;
  return v;
}

int Vocab::id(const std::string& token) const {
  auto it = ids_.find(token);
  if (it == ids_.end()) throw Error("vocab: unknown token '" + token + "'");
  return it->second;
}

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= size()) throw Error("vocab: id out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

bool Vocab::has(const std::string& token) const { return ids_.count(token) > 0; }

std::vector<int> Vocab::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

std::vector<std::string> Vocab::decode(const std::vector<int>& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int i : ids) out.push_back(token(i));
  return out;
}

}  // namespace speechee
