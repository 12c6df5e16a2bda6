#ifndef MLMEVAL_SCORER_H_
#define MLMEVAL_SCORER_H_

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace mlmeval {

using SubwordId = std::int32_t;

// Session-constant model metadata.
struct ModelInfo {
  int hidden_size = 0;
  int vocab_size = 0;
  int max_seq_len = 0;  // including [CLS] and [SEP]
  SubwordId mask_id = 0;
  SubwordId cls_id = 0;
  SubwordId sep_id = 0;
  SubwordId unk_id = 0;
  bool lowercases = false;

  bool IsSpecial(SubwordId id) const {
    return id == mask_id || id == cls_id || id == sep_id || id == unk_id;
  }
  bool InVocab(SubwordId id) const { return id >= 0 && id < vocab_size; }

  // Throws ContractError unless sizes are positive and the four special
  // ids are in range and pairwise distinct.
  void Validate() const;

  bool operator==(const ModelInfo &) const = default;
};

// Half-open interval of subword positions.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - start; }
  bool operator==(const Span &) const = default;
};

// One span per input word, in order, covering every non-special position.
struct Alignment {
  std::vector<Span> spans;
};

struct Tokenized {
  std::vector<SubwordId> ids;  // [CLS] ... [SEP]
  Alignment alignment;
};

struct Candidate {
  SubwordId id = 0;
  double score = 0.0;  // log-probability
  bool operator==(const Candidate &) const = default;
};

// Candidates for one queried position, best first.
using CandidateList = std::vector<Candidate>;

// One list per queried position, in query order.
struct TopK {
  std::vector<CandidateList> positions;
};

// Uniform access to a masked language model. Implementations must tolerate
// concurrent calls from several threads.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual ModelInfo Info() = 0;

  // Throws OverflowError when [CLS] + pieces + [SEP] exceeds max_seq_len.
  virtual Tokenized Tokenize(std::span<const std::string> words) = 0;

  // Scores every position in `positions` from a single evaluation of `ids`.
  // Each position must hold mask_id.
  virtual TopK ScoreMasked(std::span<const SubwordId> ids,
                           std::span<const std::size_t> positions, int k) = 0;

  // Final-layer vectors for the given positions of an unmasked sequence.
  virtual std::vector<std::vector<double>> Embed(
      std::span<const SubwordId> ids, std::span<const std::size_t> positions) = 0;

  // Continuation pieces attach to the previous piece; others are joined by
  // single spaces.
  virtual std::string Detokenize(std::span<const SubwordId> ids) = 0;
};

// Sorts by score descending, ascending id on ties.
void SortCandidates(CandidateList &candidates);

// Throws ContractError unless every position is in range and holds mask_id,
// and k >= 1.
void CheckMaskedQuery(const ModelInfo &info, std::span<const SubwordId> ids,
                      std::span<const std::size_t> positions, int k);

// Throws ContractError unless every position is within ids.
void CheckPositions(std::span<const SubwordId> ids,
                    std::span<const std::size_t> positions);

// Forwards to another backend and counts model evaluations.
class CountingBackend : public Backend {
 public:
  explicit CountingBackend(Backend &inner) : inner_(inner) {}

  ModelInfo Info() override { return inner_.Info(); }
  Tokenized Tokenize(std::span<const std::string> words) override {
    return inner_.Tokenize(words);
  }
  TopK ScoreMasked(std::span<const SubwordId> ids,
                   std::span<const std::size_t> positions, int k) override {
    ++score_calls_;
    return inner_.ScoreMasked(ids, positions, k);
  }
  std::vector<std::vector<double>> Embed(
      std::span<const SubwordId> ids, std::span<const std::size_t> positions) override {
    ++embed_calls_;
    return inner_.Embed(ids, positions);
  }
  std::string Detokenize(std::span<const SubwordId> ids) override {
    return inner_.Detokenize(ids);
  }

  std::size_t score_calls() const { return score_calls_.load(); }
  std::size_t embed_calls() const { return embed_calls_.load(); }
  void Reset() {
    score_calls_ = 0;
    embed_calls_ = 0;
  }

 private:
  Backend &inner_;
  std::atomic<std::size_t> score_calls_{0};
  std::atomic<std::size_t> embed_calls_{0};
};

}  // namespace mlmeval

#endif  // MLMEVAL_SCORER_H_
