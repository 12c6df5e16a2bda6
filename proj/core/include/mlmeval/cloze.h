#ifndef MLMEVAL_CLOZE_H_
#define MLMEVAL_CLOZE_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mlmeval/conllu.h"
#include "mlmeval/run_log.h"
#include "mlmeval/scorer.h"

namespace mlmeval {

inline constexpr double kDefaultMaskRate = 0.15;

// A sentence with some words fully masked, plus the model's single-pass
// guesses once predicted.
struct ClozeItem {
  std::string sent_id;
  std::size_t sentence_index = 0;  // position in the source corpus
  std::string text;
  std::vector<std::string> words;
  std::vector<bool> space_after;
  std::uint64_t rng_seed = 0;

  std::vector<std::size_t> masked_words;      // ascending word indices
  std::vector<SubwordId> ids;                 // with mask_id over masked spans
  std::vector<Span> spans;                    // word -> subword positions
  std::vector<std::size_t> masked_positions;  // ascending
  std::vector<SubwordId> gold;                // per masked position
  std::vector<SubwordId> predictions;         // per masked position
  bool predicted = false;
};

// max(1, round-half-up(rate * n_words)), capped at n_words.
std::size_t MaskCount(std::size_t n_words, double rate);

// MaskCount(n_words, rate) distinct word indices drawn uniformly with the
// seeded generator, sorted ascending. Requires 0 < rate <= 1.
std::vector<std::size_t> SelectMaskWords(std::size_t n_words, double rate, std::uint64_t seed);
std::vector<std::size_t> SelectMaskWords(const Sentence &sentence, double rate,
                                         std::uint64_t seed);

// Tokenizes the sentence and masks every subword of the chosen words. An
// overflowing sentence is logged and yields nullopt.
std::optional<ClozeItem> BuildClozeItem(const Sentence &sentence,
                                        std::span<const std::size_t> word_indices,
                                        Backend &backend, RunLog *log = nullptr);

// One ScoreMasked call with k = 1 over all masked positions.
void PredictCloze(ClozeItem &item, Backend &backend);

// Micro-averaged subword accuracy over all masked positions.
double ClozeAccuracy(std::span<const ClozeItem> items);
std::size_t MaskedPositionCount(std::span<const ClozeItem> items);

// Word sequence with each masked word shown as "[predicted~gold]".
std::string RenderCloze(const ClozeItem &item, Backend &backend);

// Selects, builds and predicts items for `sentences`. Sentence i draws its
// mask with DeriveSeed(run_seed, i); items whose sentence overflows are
// dropped. Work is spread over `threads` workers; output order and content
// do not depend on scheduling.
std::vector<ClozeItem> RunCloze(std::span<const Sentence *const> sentences, Backend &backend,
                                double rate, std::uint64_t run_seed, int threads = 1,
                                RunLog *log = nullptr);

std::string ClozeItemToJson(const ClozeItem &item);
ClozeItem ClozeItemFromJson(std::string_view line);

}  // namespace mlmeval

#endif  // MLMEVAL_CLOZE_H_
