#ifndef MLMEVAL_CONLLU_H_
#define MLMEVAL_CONLLU_H_

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace mlmeval {

// One syntactic word (a plain integer-id row). Multiword-token ranges and
// empty nodes never become Tokens.
struct Token {
  int id = 0;  // 1-based
  std::string form;
  std::string upos;
  int head = 0;  // 0 = root attachment
  std::string deprel;
  // From MISC SpaceAfter=No (on the word, or on its enclosing range line for
  // the range's last word). Only used to lay out rendered text.
  bool space_after = true;
};

struct Sentence {
  std::vector<Token> tokens;
  std::string sent_id;
  std::string text;
  int index_in_doc = 0;

  std::size_t size() const { return tokens.size(); }
  std::vector<std::string> Forms() const;

  // Number of tokens with head == 0. Probe labels need exactly one.
  int RootCount() const;
  bool HasUniqueRoot() const { return RootCount() == 1; }
  // Id of the unique root, or 0 when the tree has zero or several roots.
  int RootId() const;
};

struct Document {
  std::string doc_id;
  std::vector<Sentence> sentences;
};

struct Treebank {
  std::vector<Document> documents;

  std::size_t SentenceCount() const;
  // All sentences in file order.
  std::vector<const Sentence *> Sentences() const;
};

// Parses CoNLL-U text. Each "# newdoc" comment opens a document; sentences
// before the first one (or all of them, if there is none) go to an implicit
// document. Throws ParseError on a wrong column count, a non-integer or
// self-referencing head, or duplicate / non-consecutive word ids.
Treebank ParseConllu(std::string_view text);

// Reads and parses a UTF-8 file; errors name the path and line.
Treebank ParseConlluFile(const std::string &path);

// Sentences with min_tokens <= size <= max_tokens, in corpus order. The
// pointers refer into `treebank`.
std::vector<const Sentence *> FilterSentences(const Treebank &treebank,
                                              std::size_t min_tokens,
                                              std::size_t max_tokens);

}  // namespace mlmeval

#endif  // MLMEVAL_CONLLU_H_
