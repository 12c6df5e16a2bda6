#include "mlmeval/conllu.h"

#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <unordered_set>

#include "mlmeval/errors.h"

namespace mlmeval {
namespace {

constexpr std::size_t kColumns = 10;

std::vector<std::string_view> SplitTabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

std::optional<int> ParseInt(std::string_view s) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

// "# key = value" -> value when the comment key matches.
std::optional<std::string_view> CommentValue(std::string_view comment,
                                             std::string_view key) {
  std::string_view body = Trim(comment.substr(1));
  if (body.substr(0, key.size()) != key) return std::nullopt;
  std::string_view rest = body.substr(key.size());
  if (!rest.empty() && rest.front() != ' ' && rest.front() != '=' &&
      rest.front() != '\t') {
    return std::nullopt;  // e.g. "newdocument"
  }
  rest = Trim(rest);
  if (!rest.empty() && rest.front() == '=') rest = Trim(rest.substr(1));
  return rest;
}

bool NoSpaceAfter(std::string_view misc) {
  std::size_t start = 0;
  while (start <= misc.size()) {
    std::size_t bar = misc.find('|', start);
    std::string_view item = misc.substr(
        start, bar == std::string_view::npos ? std::string_view::npos : bar - start);
    if (item == "SpaceAfter=No") return true;
    if (bar == std::string_view::npos) break;
    start = bar + 1;
  }
  return false;
}

class Builder {
 public:
  void Comment(std::string_view line) {
    if (auto v = CommentValue(line, "newdoc")) {
      pending_doc_ = true;
      // "# newdoc id = X"; a bare "# newdoc" leaves the id empty.
      std::string_view id = *v;
      if (id.substr(0, 2) == "id") {
        std::string_view rest = Trim(id.substr(2));
        if (!rest.empty() && rest.front() == '=') id = Trim(rest.substr(1));
      }
      pending_doc_id_ = std::string(id);
    } else if (auto v = CommentValue(line, "sent_id")) {
      sent_id_ = std::string(*v);
    } else if (auto v = CommentValue(line, "text")) {
      text_ = std::string(*v);
      has_text_ = true;
    }
  }

  void Row(std::string_view line, std::size_t line_no) {
    std::vector<std::string_view> f = SplitTabs(line);
    if (f.size() != kColumns) {
      throw ParseError(line_no, "expected 10 tab-separated columns, got " +
                                    std::to_string(f.size()));
    }
    std::string_view id = f[0];
    if (id.find('.') != std::string_view::npos) return;  // empty node
    if (std::size_t dash = id.find('-'); dash != std::string_view::npos) {
      auto first = ParseInt(id.substr(0, dash));
      auto last = ParseInt(id.substr(dash + 1));
      if (!first || !last || *first < 1 || *last < *first) {
        throw ParseError(line_no, "bad multiword token range '" + std::string(id) + "'");
      }
      range_last_ = *last;
      range_no_space_ = NoSpaceAfter(f[9]);
      return;
    }
    auto word_id = ParseInt(id);
    if (!word_id || *word_id < 1) {
      throw ParseError(line_no, "bad word id '" + std::string(id) + "'");
    }
    if (!ids_.insert(*word_id).second) {
      throw ParseError(line_no, "duplicate word id " + std::to_string(*word_id));
    }
    if (*word_id != static_cast<int>(tokens_.size()) + 1) {
      throw ParseError(line_no, "word id " + std::to_string(*word_id) +
                                    " is not consecutive");
    }
    auto head = ParseInt(f[6]);
    if (!head || *head < 0) {
      throw ParseError(line_no, "non-integer head '" + std::string(f[6]) + "'");
    }
    if (*head == *word_id) {
      throw ParseError(line_no, "word " + std::to_string(*word_id) + " is its own head");
    }
    if (f[1].empty()) throw ParseError(line_no, "empty form");

    Token token;
    token.id = *word_id;
    token.form = std::string(f[1]);
    token.upos = std::string(f[3]);
    token.head = *head;
    token.deprel = std::string(f[7]);
    if (range_last_ >= *word_id) {
      token.space_after = *word_id == range_last_ ? !range_no_space_ : false;
    } else {
      token.space_after = !NoSpaceAfter(f[9]);
    }
    tokens_.push_back(std::move(token));
    head_lines_.push_back(line_no);
  }

  void EndBlock() {
    if (tokens_.empty()) {
      // Comment-only block: keep pending newdoc, drop sentence-level comments.
      ResetSentence();
      return;
    }
    const int n = static_cast<int>(tokens_.size());
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (tokens_[i].head > n) {
        throw ParseError(head_lines_[i], "head " + std::to_string(tokens_[i].head) +
                                             " out of range");
      }
    }
    if (pending_doc_ || treebank_.documents.empty()) {
      Document doc;
      doc.doc_id = pending_doc_ && !pending_doc_id_.empty()
                       ? pending_doc_id_
                       : "doc" + std::to_string(treebank_.documents.size() + 1);
      treebank_.documents.push_back(std::move(doc));
      pending_doc_ = false;
      pending_doc_id_.clear();
    }
    Document &doc = treebank_.documents.back();
    ++sentence_count_;
    Sentence sentence;
    sentence.sent_id = sent_id_.empty() ? "s" + std::to_string(sentence_count_) : sent_id_;
    sentence.index_in_doc = static_cast<int>(doc.sentences.size());
    sentence.tokens = std::move(tokens_);
    if (has_text_ && !text_.empty()) {
      sentence.text = text_;
    } else {
      for (const Token &t : sentence.tokens) {
        if (!sentence.text.empty()) sentence.text += ' ';
        sentence.text += t.form;
      }
    }
    doc.sentences.push_back(std::move(sentence));
    ResetSentence();
  }

  Treebank Finish() { return std::move(treebank_); }

 private:
  void ResetSentence() {
    tokens_.clear();
    head_lines_.clear();
    ids_.clear();
    sent_id_.clear();
    text_.clear();
    has_text_ = false;
    range_last_ = 0;
    range_no_space_ = false;
  }

  Treebank treebank_;
  std::size_t sentence_count_ = 0;
  bool pending_doc_ = false;
  std::string pending_doc_id_;

  std::vector<Token> tokens_;
  std::vector<std::size_t> head_lines_;
  std::unordered_set<int> ids_;
  std::string sent_id_;
  std::string text_;
  bool has_text_ = false;
  int range_last_ = 0;
  bool range_no_space_ = false;
};

}  // namespace

std::vector<std::string> Sentence::Forms() const {
  std::vector<std::string> forms;
  forms.reserve(tokens.size());
  for (const Token &t : tokens) forms.push_back(t.form);
  return forms;
}

int Sentence::RootCount() const {
  int roots = 0;
  for (const Token &t : tokens) roots += t.head == 0;
  return roots;
}

int Sentence::RootId() const {
  int root = 0;
  for (const Token &t : tokens) {
    if (t.head != 0) continue;
    if (root != 0) return 0;
    root = t.id;
  }
  return root;
}

std::size_t Treebank::SentenceCount() const {
  std::size_t n = 0;
  for (const Document &d : documents) n += d.sentences.size();
  return n;
}

std::vector<const Sentence *> Treebank::Sentences() const {
  std::vector<const Sentence *> out;
  out.reserve(SentenceCount());
  for (const Document &d : documents) {
    for (const Sentence &s : d.sentences) out.push_back(&s);
  }
  return out;
}

Treebank ParseConllu(std::string_view text) {
  Builder builder;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    std::string_view line = text.substr(
        start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    start = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line_no == 1 && line.substr(0, 3) == "\xEF\xBB\xBF") line.remove_prefix(3);

    if (Trim(line).empty()) {
      builder.EndBlock();
    } else if (line.front() == '#') {
      builder.Comment(line);
    } else {
      builder.Row(line, line_no);
    }
  }
  builder.EndBlock();
  return builder.Finish();
}

Treebank ParseConlluFile(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return ParseConllu(buffer.str());
  } catch (const ParseError &e) {
    throw ParseError(e.line(), e.detail(), path);
  }
}

std::vector<const Sentence *> FilterSentences(const Treebank &treebank,
                                              std::size_t min_tokens,
                                              std::size_t max_tokens) {
  if (min_tokens < 1 || min_tokens > max_tokens) {
    throw ContractError("FilterSentences: need 1 <= min_tokens <= max_tokens");
  }
  std::vector<const Sentence *> out;
  for (const Document &d : treebank.documents) {
    for (const Sentence &s : d.sentences) {
      if (s.size() >= min_tokens && s.size() <= max_tokens) out.push_back(&s);
    }
  }
  return out;
}

}  // namespace mlmeval
