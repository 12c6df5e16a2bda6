#include "mlmeval/generate.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "mlmeval/errors.h"
#include "mlmeval/parallel.h"
#include "mlmeval/rng.h"

namespace mlmeval {
namespace {

using json = nlohmann::json;

std::vector<std::string> Whitespace(const std::string &text) {
  std::istringstream in(text);
  std::vector<std::string> words;
  for (std::string w; in >> w;) words.push_back(std::move(w));
  return words;
}

// Context pieces without [CLS]/[SEP]. Contexts longer than the model limit
// are tokenized word by word.
std::vector<SubwordId> ContextPieces(const std::string &text, Backend &backend) {
  std::vector<std::string> words = Whitespace(text);
  std::vector<SubwordId> out;
  try {
    Tokenized tok = backend.Tokenize(words);
    out.assign(tok.ids.begin() + 1, tok.ids.end() - 1);
  } catch (const OverflowError &) {
    for (const std::string &w : words) {
      Tokenized tok = backend.Tokenize(std::span<const std::string>(&w, 1));
      out.insert(out.end(), tok.ids.begin() + 1, tok.ids.end() - 1);
    }
  }
  return out;
}

SubwordId SampleCandidate(const CandidateList &candidates, double temperature, Rng &rng) {
  const double top = candidates.front().score / temperature;
  std::vector<double> weights;
  weights.reserve(candidates.size());
  double total = 0.0;
  for (const Candidate &c : candidates) {
    weights.push_back(std::exp(c.score / temperature - top));
    total += weights.back();
  }
  double u = rng.UniformDouble() * total;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (u < weights[i]) return candidates[i].id;
    u -= weights[i];
  }
  return candidates.back().id;
}

}  // namespace

int WindowLength(std::size_t subwords) {
  return static_cast<int>(std::clamp<std::size_t>(subwords, kMinWindow, kMaxWindow));
}

std::vector<GenerationTask> SampleTasks(const Treebank &treebank, Backend &backend,
                                        std::size_t n_docs, std::size_t per_doc,
                                        std::uint64_t seed, RunLog *log) {
  Rng rng(seed);
  std::vector<GenerationTask> tasks;
  for (std::size_t d : rng.SampleIndices(treebank.documents.size(), n_docs)) {
    const Document &doc = treebank.documents[d];
    if (doc.sentences.size() < 3) continue;
    const std::size_t eligible = doc.sentences.size() - 2;
    for (std::size_t pick : rng.SampleIndices(eligible, per_doc)) {
      const std::size_t s = pick + 1;
      const Sentence &sentence = doc.sentences[s];
      std::size_t subwords;
      try {
        subwords = backend.Tokenize(sentence.Forms()).ids.size() - 2;
      } catch (const OverflowError &e) {
        subwords = e.required_length() - 2;
      }
      GenerationTask task;
      task.doc_id = doc.doc_id;
      task.doc_index = d;
      task.sentence_index = s;
      task.sent_id = sentence.sent_id;
      task.original_text = sentence.text;
      task.left_text = doc.sentences[s - 1].text;
      task.right_text = doc.sentences[s + 1].text;
      task.window_len = WindowLength(subwords);
      tasks.push_back(std::move(task));
    }
  }
  std::sort(tasks.begin(), tasks.end(), [](const GenerationTask &a, const GenerationTask &b) {
    return std::tie(a.doc_index, a.sentence_index) < std::tie(b.doc_index, b.sentence_index);
  });
  for (std::size_t i = 0; i < tasks.size(); ++i) tasks[i].rng_seed = DeriveSeed(seed, i);
  if (log && tasks.size() < n_docs * per_doc) {
    log->Warn("generate: sampled " + std::to_string(tasks.size()) + " of " +
              std::to_string(n_docs * per_doc) + " requested tasks");
  }
  return tasks;
}

AssembledInput AssembleInput(const GenerationTask &task, std::span<const SubwordId> window_ids,
                             Backend &backend) {
  if (window_ids.size() != static_cast<std::size_t>(task.window_len)) {
    throw ContractError("window length does not match the task");
  }
  const ModelInfo info = backend.Info();
  const std::size_t limit = static_cast<std::size_t>(info.max_seq_len);
  if (window_ids.size() + 2 > limit) {
    throw ContractError("generation window alone exceeds max_seq_len");
  }
  std::vector<SubwordId> left = ContextPieces(task.left_text, backend);
  std::vector<SubwordId> right = ContextPieces(task.right_text, backend);

  std::size_t left_begin = 0;
  std::size_t right_end = right.size();
  auto total = [&] { return 2 + (left.size() - left_begin) + window_ids.size() + right_end; };
  while (total() > limit) {
    if (left.size() - left_begin >= right_end) {
      ++left_begin;
    } else {
      --right_end;
    }
  }

  AssembledInput out;
  out.ids.reserve(total());
  out.ids.push_back(info.cls_id);
  out.ids.insert(out.ids.end(), left.begin() + left_begin, left.end());
  for (SubwordId id : window_ids) {
    out.window_positions.push_back(out.ids.size());
    out.ids.push_back(id);
  }
  out.ids.insert(out.ids.end(), right.begin(), right.begin() + right_end);
  out.ids.push_back(info.sep_id);
  return out;
}

GenerationResult GibbsGenerate(const GenerationTask &task, Backend &backend,
                               const GibbsOptions &options, std::uint64_t seed) {
  if (options.top_k < 1) throw ContractError("top_k must be >= 1");
  if (!(options.temperature > 0.0)) throw ContractError("temperature must be positive");
  if (options.max_iterations < 0 || options.burn_in < 0) {
    throw ContractError("iteration counts must be non-negative");
  }
  const SubwordId mask = backend.Info().mask_id;
  const std::size_t width = static_cast<std::size_t>(task.window_len);
  std::vector<SubwordId> window(width, mask);
  AssembledInput input = AssembleInput(task, window, backend);
  std::vector<SubwordId> &ids = input.ids;

  Rng rng(seed);
  GenerationResult result;
  std::size_t unchanged = 0;
  std::size_t masks_left = width;
  for (int it = 0; it < options.max_iterations; ++it) {
    const std::size_t p = input.window_positions[rng.UniformIndex(width)];
    const SubwordId previous = ids[p];
    ids[p] = mask;
    const std::size_t query[1] = {p};
    TopK top = backend.ScoreMasked(ids, query, options.top_k);
    const CandidateList &candidates = top.positions.at(0);
    if (candidates.empty()) throw ContractError("backend returned no candidates");
    const SubwordId chosen = it < options.burn_in
                                 ? SampleCandidate(candidates, options.temperature, rng)
                                 : candidates.front().id;
    ids[p] = chosen;
    if (previous == mask && chosen != mask) --masks_left;
    result.iterations_used = it + 1;
    if (it >= options.burn_in) {
      unchanged = chosen == previous ? unchanged + 1 : 0;
      if (unchanged >= width && masks_left == 0) {
        result.converged = true;
        break;
      }
    }
  }
  for (std::size_t p : input.window_positions) result.window_ids.push_back(ids[p]);
  result.text = backend.Detokenize(result.window_ids);
  return result;
}

std::vector<GenerationResult> RunGeneration(std::span<const GenerationTask> tasks,
                                            Backend &backend, const GibbsOptions &options,
                                            int threads) {
  std::vector<GenerationResult> results(tasks.size());
  ParallelFor(tasks.size(), threads, [&](std::size_t i) {
    results[i] = GibbsGenerate(tasks[i], backend, options, tasks[i].rng_seed);
  });
  return results;
}

std::string GenerationToJson(const GenerationTask &task, const GenerationResult &result,
                             const GibbsOptions &options) {
  json j = {{"doc_id", task.doc_id},
            {"doc_index", task.doc_index},
            {"sentence_index", task.sentence_index},
            {"sent_id", task.sent_id},
            {"original_text", task.original_text},
            {"left_text", task.left_text},
            {"right_text", task.right_text},
            {"window_len", task.window_len},
            {"rng_seed", task.rng_seed},
            {"window_ids", result.window_ids},
            {"text", result.text},
            {"iterations_used", result.iterations_used},
            {"converged", result.converged},
            {"parameters",
             {{"max_iterations", options.max_iterations},
              {"burn_in", options.burn_in},
              {"top_k", options.top_k},
              {"temperature", options.temperature}}}};
  return j.dump();
}

std::string ContextSheetLine(const GenerationTask &task, const GenerationResult &result) {
  return task.left_text + " **" + result.text + "** " + task.right_text;
}

}  // namespace mlmeval
