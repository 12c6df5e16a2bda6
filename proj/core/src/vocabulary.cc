#include "mlmeval/vocabulary.h"

#include "mlmeval/errors.h"

namespace mlmeval {

Vocabulary::Vocabulary() {
  for (const char *special : {"[UNK]", "[CLS]", "[SEP]", "[MASK]"}) Add(special);
}

SubwordId Vocabulary::Add(std::string_view piece) {
  auto it = index_.find(std::string(piece));
  if (it != index_.end()) return it->second;
  const SubwordId id = static_cast<SubwordId>(pieces_.size());
  pieces_.emplace_back(piece);
  index_.emplace(pieces_.back(), id);
  return id;
}

std::optional<SubwordId> Vocabulary::Find(std::string_view piece) const {
  auto it = index_.find(std::string(piece));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<SubwordId> Vocabulary::SplitWord(std::string_view word) const {
  if (auto whole = Find(word)) return {*whole};
  std::vector<SubwordId> out;
  std::size_t start = 0;
  while (start < word.size()) {
    std::optional<SubwordId> match;
    std::size_t end = word.size();
    for (; end > start; --end) {
      // Only cut on UTF-8 character boundaries.
      if (end < word.size() && (static_cast<unsigned char>(word[end]) & 0xC0) == 0x80) continue;
      std::string candidate(word.substr(start, end - start));
      if (start > 0) candidate.insert(0, "##");
      if ((match = Find(candidate))) break;
    }
    if (!match) return {kUnk};
    out.push_back(*match);
    start = end;
  }
  return out;
}

std::string Vocabulary::Join(std::span<const SubwordId> ids) const {
  std::string text;
  for (SubwordId id : ids) {
    if (id < 0 || id >= size()) {
      throw ContractError("unknown subword id " + std::to_string(id));
    }
    const std::string &piece = pieces_[id];
    if (piece.size() > 2 && piece.compare(0, 2, "##") == 0) {
      text.append(piece, 2);
    } else {
      if (!text.empty()) text += ' ';
      text += piece;
    }
  }
  return text;
}

std::string AsciiLower(std::string_view s) {
  std::string out(s);
  for (char &c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

}  // namespace mlmeval
