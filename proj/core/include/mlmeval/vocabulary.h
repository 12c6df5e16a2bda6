#ifndef MLMEVAL_VOCABULARY_H_
#define MLMEVAL_VOCABULARY_H_

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mlmeval/scorer.h"

namespace mlmeval {

// WordPiece-style piece inventory. Ids 0..3 are [UNK] [CLS] [SEP] [MASK];
// ordinary pieces follow in insertion order. A piece beginning with "##"
// continues the previous piece of the same word.
class Vocabulary {
 public:
  static constexpr SubwordId kUnk = 0;
  static constexpr SubwordId kCls = 1;
  static constexpr SubwordId kSep = 2;
  static constexpr SubwordId kMask = 3;
  static constexpr int kSpecialCount = 4;

  Vocabulary();

  // Returns the id of `piece`, adding it if new.
  SubwordId Add(std::string_view piece);

  std::optional<SubwordId> Find(std::string_view piece) const;
  const std::string &Piece(SubwordId id) const { return pieces_.at(id); }
  int size() const { return static_cast<int>(pieces_.size()); }

  // Greedy longest-match-first split. A word with no complete split becomes
  // a single [UNK], as in BERT.
  std::vector<SubwordId> SplitWord(std::string_view word) const;

  // Joins pieces: "##x" glues to the previous piece, others get a space.
  // Throws ContractError on an unknown id.
  std::string Join(std::span<const SubwordId> ids) const;

 private:
  std::vector<std::string> pieces_;
  std::unordered_map<std::string, SubwordId> index_;
};

// ASCII-only lowercasing; other bytes pass through.
std::string AsciiLower(std::string_view s);

}  // namespace mlmeval

#endif  // MLMEVAL_VOCABULARY_H_
