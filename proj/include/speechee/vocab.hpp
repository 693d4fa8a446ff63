#ifndef SPEECHEE_VOCAB_HPP_
#define SPEECHEE_VOCAB_HPP_

#include <map>
#include <string>
#include <vector>

#include "speechee/schema.hpp"

namespace speechee {

// Token vocabulary shared by decoder, constrained decoding and the text
// encoder: specials, structure parens, schema labels, then mention words.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kOpen = 3;
  static constexpr int kClose = 4;

  Vocab() = default;
  Vocab(const EventSchema& schema, const std::vector<std::string>& words);

  int id(const std::string& token) const;       // throws on unknown
  const std::string& token(int id) const;
  bool has(const std::string& token) const;
  int size() const { return static_cast<int>(tokens_.size()); }

  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  std::vector<std::string> decode(const std::vector<int>& ids) const;

  const std::vector<std::string>& words() const { return words_; }

  std::vector<std::string> all_tokens() const { return tokens_; }
  static Vocab from_tokens(const std::vector<std::string>& tokens,
                           const std::vector<std::string>& words);

 private:
  std::vector<std::string> tokens_;
  std::vector<std::string> words_;  // mention vocabulary subset
  std::map<std::string, int> ids_;
};

}  // namespace speechee

#endif  // SPEECHEE_VOCAB_HPP_
