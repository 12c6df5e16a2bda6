#include "mlmeval/toy_backends.h"

#include <cmath>

#include "mlmeval/errors.h"
#include "mlmeval/rng.h"

namespace mlmeval {
namespace {

TopK RepeatRanking(const CandidateList &ranking, std::size_t positions, int k) {
  CandidateList head(ranking.begin(),
                     ranking.begin() + std::min<std::size_t>(ranking.size(), k));
  TopK out;
  out.positions.assign(positions, head);
  return out;
}

}  // namespace

ToyBackend::ToyBackend(Vocabulary vocab, ToyOptions options)
    : vocab_(std::move(vocab)), options_(options) {
  info_.hidden_size = options.hidden_size;
  info_.vocab_size = vocab_.size();
  info_.max_seq_len = options.max_seq_len;
  info_.mask_id = Vocabulary::kMask;
  info_.cls_id = Vocabulary::kCls;
  info_.sep_id = Vocabulary::kSep;
  info_.unk_id = Vocabulary::kUnk;
  info_.lowercases = options.lowercases;
  info_.Validate();
}

std::string ToyBackend::Normalize(std::string_view word) const {
  return options_.lowercases ? AsciiLower(word) : std::string(word);
}

std::optional<SubwordId> ToyBackend::WordId(std::string_view word) const {
  return vocab_.Find(Normalize(word));
}

Tokenized ToyBackend::Tokenize(std::span<const std::string> words) {
  Tokenized out;
  out.ids.push_back(info_.cls_id);
  for (const std::string &word : words) {
    if (word.empty()) throw ContractError("tokenize: empty word");
    std::vector<SubwordId> pieces = vocab_.SplitWord(Normalize(word));
    Span span{out.ids.size(), out.ids.size() + pieces.size()};
    out.ids.insert(out.ids.end(), pieces.begin(), pieces.end());
    out.alignment.spans.push_back(span);
  }
  out.ids.push_back(info_.sep_id);
  if (out.ids.size() > static_cast<std::size_t>(info_.max_seq_len)) {
    throw OverflowError(out.ids.size());
  }
  return out;
}

std::vector<std::vector<double>> ToyBackend::Embed(
    std::span<const SubwordId> ids, std::span<const std::size_t> positions) {
  CheckPositions(ids, positions);
  std::vector<std::vector<double>> vectors;
  vectors.reserve(positions.size());
  for (std::size_t p : positions) {
    if (!info_.InVocab(ids[p])) {
      throw ContractError("unknown subword id " + std::to_string(ids[p]));
    }
    Rng rng(DeriveSeed(options_.embed_seed, static_cast<std::uint64_t>(ids[p])));
    std::vector<double> v(info_.hidden_size);
    for (double &x : v) x = rng.Normal();
    vectors.push_back(std::move(v));
  }
  return vectors;
}

std::string ToyBackend::Detokenize(std::span<const SubwordId> ids) {
  return vocab_.Join(ids);
}

void EchoBackend::AddReference(std::vector<SubwordId> ids) {
  for (SubwordId id : ids) {
    if (!info().InVocab(id)) throw ContractError("reference holds unknown id");
  }
  by_length_[ids.size()].push_back(std::move(ids));
}

void EchoBackend::AddReferenceWords(std::span<const std::string> words) {
  AddReference(Tokenize(words).ids);
}

TopK EchoBackend::ScoreMasked(std::span<const SubwordId> ids,
                              std::span<const std::size_t> positions, int k) {
  CheckMaskedQuery(info(), ids, positions, k);
  const SubwordId mask = info().mask_id;
  const std::vector<SubwordId> *match = nullptr;
  if (auto it = by_length_.find(ids.size()); it != by_length_.end()) {
    for (const auto &ref : it->second) {
      bool agrees = true;
      for (std::size_t i = 0; i < ids.size() && agrees; ++i) {
        agrees = ids[i] == mask || ids[i] == ref[i];
      }
      if (agrees) {
        match = &ref;
        break;
      }
    }
  }
  if (match == nullptr) {
    throw ContractError("echo backend: no gold configured for this context");
  }
  TopK out;
  for (std::size_t p : positions) {
    out.positions.push_back({Candidate{(*match)[p], 0.0}});
  }
  return out;
}

UnigramBackend::UnigramBackend(Vocabulary vocab, ToyOptions options,
                               std::vector<std::uint64_t> counts)
    : ToyBackend(std::move(vocab), options) {
  if (counts.size() != static_cast<std::size_t>(info().vocab_size)) {
    throw ContractError("unigram backend: one count per vocabulary entry required");
  }
  std::uint64_t total = 0;
  for (SubwordId id = 0; id < info().vocab_size; ++id) {
    if (!info().IsSpecial(id)) total += counts[id];
  }
  if (total == 0) throw ContractError("unigram backend: empty corpus");
  const double log_total = std::log(static_cast<double>(total));
  for (SubwordId id = 0; id < info().vocab_size; ++id) {
    if (info().IsSpecial(id) || counts[id] == 0) continue;
    ranking_.push_back({id, std::log(static_cast<double>(counts[id])) - log_total});
  }
  SortCandidates(ranking_);
}

TopK UnigramBackend::ScoreMasked(std::span<const SubwordId> ids,
                                 std::span<const std::size_t> positions, int k) {
  CheckMaskedQuery(info(), ids, positions, k);
  return RepeatRanking(ranking_, positions.size(), k);
}

ConstantBackend::ConstantBackend(Vocabulary vocab, ToyOptions options,
                                 SubwordId target)
    : ToyBackend(std::move(vocab), options), target_(target) {
  if (!info().InVocab(target) || info().IsSpecial(target)) {
    throw ContractError("constant backend: target must be an ordinary vocabulary id");
  }
  const int others = info().vocab_size - Vocabulary::kSpecialCount - 1;
  ranking_.push_back({target, others > 0 ? std::log(0.9) : 0.0});
  for (SubwordId id = 0; id < info().vocab_size; ++id) {
    if (id == target || info().IsSpecial(id)) continue;
    ranking_.push_back({id, std::log(0.1 / others)});
  }
  SortCandidates(ranking_);
}

TopK ConstantBackend::ScoreMasked(std::span<const SubwordId> ids,
                                  std::span<const std::size_t> positions, int k) {
  CheckMaskedQuery(info(), ids, positions, k);
  return RepeatRanking(ranking_, positions.size(), k);
}

Vocabulary CorpusVocabulary(std::span<const Sentence *const> corpus, bool lowercase) {
  Vocabulary vocab;
  for (const Sentence *s : corpus) {
    for (const Token &t : s->tokens) vocab.Add(lowercase ? AsciiLower(t.form) : t.form);
  }
  return vocab;
}

std::unique_ptr<EchoBackend> MakeEchoBackend(std::span<const Sentence *const> corpus,
                                             ToyOptions options,
                                             std::span<const std::string> pieces) {
  Vocabulary vocab;
  if (pieces.empty()) {
    vocab = CorpusVocabulary(corpus, options.lowercases);
  } else {
    for (const std::string &piece : pieces) vocab.Add(piece);
  }
  auto backend = std::make_unique<EchoBackend>(std::move(vocab), options);
  for (const Sentence *s : corpus) {
    std::vector<std::string> forms = s->Forms();
    try {
      backend->AddReferenceWords(forms);
    } catch (const OverflowError &) {
      // Never queryable either; nothing to register.
    }
  }
  return backend;
}

std::unique_ptr<UnigramBackend> MakeUnigramBackend(
    std::span<const Sentence *const> corpus, ToyOptions options) {
  Vocabulary vocab = CorpusVocabulary(corpus, options.lowercases);
  std::vector<std::uint64_t> counts(vocab.size(), 0);
  for (const Sentence *s : corpus) {
    for (const Token &t : s->tokens) {
      ++counts[*vocab.Find(options.lowercases ? AsciiLower(t.form) : t.form)];
    }
  }
  return std::make_unique<UnigramBackend>(std::move(vocab), options, std::move(counts));
}

std::unique_ptr<ConstantBackend> MakeConstantBackend(std::span<const std::string> words,
                                                     const std::string &target,
                                                     ToyOptions options) {
  Vocabulary vocab;
  for (const std::string &w : words) vocab.Add(w);
  SubwordId target_id = vocab.Add(target);
  return std::make_unique<ConstantBackend>(std::move(vocab), options, target_id);
}

}  // namespace mlmeval
