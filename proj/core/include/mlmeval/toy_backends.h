#ifndef MLMEVAL_TOY_BACKENDS_H_
#define MLMEVAL_TOY_BACKENDS_H_

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "mlmeval/conllu.h"
#include "mlmeval/scorer.h"
#include "mlmeval/vocabulary.h"

namespace mlmeval {

struct ToyOptions {
  int hidden_size = 768;
  int max_seq_len = 512;
  bool lowercases = false;
  std::uint64_t embed_seed = 0;
};

// In-process backend over a fixed Vocabulary. Embeddings are a seeded
// standard-normal vector per (subword id, embed_seed), independent of
// context. Subclasses supply ScoreMasked. Immutable after construction
// (echo references aside), so safe for concurrent readers.
class ToyBackend : public Backend {
 public:
  ToyBackend(Vocabulary vocab, ToyOptions options);

  ModelInfo Info() override { return info_; }
  Tokenized Tokenize(std::span<const std::string> words) override;
  std::vector<std::vector<double>> Embed(
      std::span<const SubwordId> ids, std::span<const std::size_t> positions) override;
  std::string Detokenize(std::span<const SubwordId> ids) override;

  const Vocabulary &vocab() const { return vocab_; }
  const ModelInfo &info() const { return info_; }
  // Id of a whole word, after case folding when the backend lowercases.
  std::optional<SubwordId> WordId(std::string_view word) const;

 protected:
  std::string Normalize(std::string_view word) const;

 private:
  Vocabulary vocab_;
  ToyOptions options_;
  ModelInfo info_;
};

// Predicts the original subword with probability 1. References are the
// unmasked id sequences; a query resolves against the first reference of
// the same length that agrees on every non-masked position. A masked query
// with no such reference is a ContractError.
class EchoBackend : public ToyBackend {
 public:
  using ToyBackend::ToyBackend;

  void AddReference(std::vector<SubwordId> ids);
  // Tokenizes `words` and registers the result. Throws OverflowError.
  void AddReferenceWords(std::span<const std::string> words);

  TopK ScoreMasked(std::span<const SubwordId> ids,
                   std::span<const std::size_t> positions, int k) override;

 private:
  std::unordered_map<std::size_t, std::vector<std::vector<SubwordId>>> by_length_;
};

// Context-free unigram model: every masked position gets the same
// distribution, log(count / total) over corpus words, ties by ascending id.
class UnigramBackend : public ToyBackend {
 public:
  UnigramBackend(Vocabulary vocab, ToyOptions options,
                 std::vector<std::uint64_t> counts);

  TopK ScoreMasked(std::span<const SubwordId> ids,
                   std::span<const std::size_t> positions, int k) override;

  const CandidateList &ranking() const { return ranking_; }

 private:
  CandidateList ranking_;
};

// Always prefers one fixed id (probability 0.9); the rest share 0.1.
class ConstantBackend : public ToyBackend {
 public:
  ConstantBackend(Vocabulary vocab, ToyOptions options, SubwordId target);

  TopK ScoreMasked(std::span<const SubwordId> ids,
                   std::span<const std::size_t> positions, int k) override;

  SubwordId target() const { return target_; }

 private:
  SubwordId target_;
  CandidateList ranking_;
};

// Vocabulary of whole words in first-appearance order over `corpus`.
Vocabulary CorpusVocabulary(std::span<const Sentence *const> corpus, bool lowercase);

// Echo backend with every corpus sentence registered as a reference. The
// vocabulary is the corpus words, or exactly `pieces` when given (so words
// can split into several pieces).
std::unique_ptr<EchoBackend> MakeEchoBackend(
    std::span<const Sentence *const> corpus, ToyOptions options = {},
    std::span<const std::string> pieces = {});

// Unigram backend over whole corpus words. Requires a non-empty corpus.
std::unique_ptr<UnigramBackend> MakeUnigramBackend(
    std::span<const Sentence *const> corpus, ToyOptions options = {});

// Vocabulary `words`; the preferred id is that of `target`, which is added
// if missing.
std::unique_ptr<ConstantBackend> MakeConstantBackend(
    std::span<const std::string> words, const std::string &target,
    ToyOptions options = {});

}  // namespace mlmeval

#endif  // MLMEVAL_TOY_BACKENDS_H_
