#ifndef MLMEVAL_GENERATE_H_
#define MLMEVAL_GENERATE_H_

// Context-seeded generation: a window of [MASK] symbols between the
// neighbouring sentences of a treebank sentence is filled by Gibbs-style
// resampling of one random position per iteration.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mlmeval/conllu.h"
#include "mlmeval/run_log.h"
#include "mlmeval/scorer.h"

namespace mlmeval {

inline constexpr int kMinWindow = 5;
inline constexpr int kMaxWindow = 15;

struct GenerationTask {
  std::string doc_id;
  std::size_t doc_index = 0;
  std::size_t sentence_index = 0;  // within the document
  std::string sent_id;
  std::string original_text;
  std::string left_text;
  std::string right_text;
  int window_len = kMinWindow;
  std::uint64_t rng_seed = 0;
};

struct GibbsOptions {
  int max_iterations = 500;
  int burn_in = 250;
  int top_k = 100;
  double temperature = 1.0;
};

struct GenerationResult {
  std::vector<SubwordId> window_ids;
  std::string text;
  int iterations_used = 0;
  bool converged = false;
};

struct AssembledInput {
  std::vector<SubwordId> ids;
  std::vector<std::size_t> window_positions;
};

// clamp(subwords, 5, 15).
int WindowLength(std::size_t subwords);

// Draws up to n_docs documents, then up to per_doc sentences from each that
// have a neighbour on both sides. Tasks come out in (document, sentence)
// order; task i gets rng_seed DeriveSeed(seed, i). A short draw is logged.
std::vector<GenerationTask> SampleTasks(const Treebank &treebank, Backend &backend,
                                        std::size_t n_docs, std::size_t per_doc,
                                        std::uint64_t seed, RunLog *log = nullptr);

// [CLS] left window right [SEP]. Over max_seq_len, the outermost subword of
// whichever context is currently longer (left on ties) is dropped until it
// fits; the window is never trimmed.
AssembledInput AssembleInput(const GenerationTask &task, std::span<const SubwordId> window_ids,
                             Backend &backend);

// Starts from an all-mask window. Each iteration re-masks one uniformly drawn
// window position and refills it: sampled from softmax(score / temperature)
// over the top_k candidates before burn_in, argmax afterwards. Stops early
// once no [MASK] is left and the window has been unchanged for window_len
// consecutive post-burn-in iterations.
GenerationResult GibbsGenerate(const GenerationTask &task, Backend &backend,
                               const GibbsOptions &options, std::uint64_t seed);

// GibbsGenerate over every task with its own rng_seed.
std::vector<GenerationResult> RunGeneration(std::span<const GenerationTask> tasks,
                                            Backend &backend, const GibbsOptions &options,
                                            int threads = 1);

std::string GenerationToJson(const GenerationTask &task, const GenerationResult &result,
                             const GibbsOptions &options);

// Left context, the generated text between ** markers, right context.
std::string ContextSheetLine(const GenerationTask &task, const GenerationResult &result);

}  // namespace mlmeval

#endif  // MLMEVAL_GENERATE_H_
