#include "mlmeval/cloze.h"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "mlmeval/errors.h"
#include "mlmeval/parallel.h"
#include "mlmeval/rng.h"

namespace mlmeval {

using json = nlohmann::json;

std::size_t MaskCount(std::size_t n_words, double rate) {
  if (!(rate > 0.0 && rate <= 1.0)) throw ContractError("mask rate must be in (0, 1]");
  if (n_words == 0) return 0;
  // Products like 0.15 * 10 land a hair under .5; the slack keeps them
  // rounding up.
  const double scaled = rate * static_cast<double>(n_words);
  auto count = static_cast<std::size_t>(std::floor(scaled + 0.5 + 1e-9));
  return std::clamp<std::size_t>(count, 1, n_words);
}

std::vector<std::size_t> SelectMaskWords(std::size_t n_words, double rate,
                                         std::uint64_t seed) {
  const std::size_t count = MaskCount(n_words, rate);
  Rng rng(seed);
  std::vector<std::size_t> picked = rng.SampleIndices(n_words, count);
  std::sort(picked.begin(), picked.end());
  return picked;
}

std::vector<std::size_t> SelectMaskWords(const Sentence &sentence, double rate,
                                         std::uint64_t seed) {
  return SelectMaskWords(sentence.size(), rate, seed);
}

std::optional<ClozeItem> BuildClozeItem(const Sentence &sentence,
                                        std::span<const std::size_t> word_indices,
                                        Backend &backend, RunLog *log) {
  ClozeItem item;
  item.sent_id = sentence.sent_id;
  item.text = sentence.text;
  item.words = sentence.Forms();
  for (const Token &t : sentence.tokens) item.space_after.push_back(t.space_after);
  item.masked_words.assign(word_indices.begin(), word_indices.end());
  std::sort(item.masked_words.begin(), item.masked_words.end());
  for (std::size_t i = 0; i < item.masked_words.size(); ++i) {
    if (item.masked_words[i] >= item.words.size() ||
        (i > 0 && item.masked_words[i] == item.masked_words[i - 1])) {
      throw ContractError("cloze: word indices must be distinct and within the sentence");
    }
  }

  Tokenized tok;
  try {
    tok = backend.Tokenize(item.words);
  } catch (const OverflowError &e) {
    if (log) log->Warn("cloze: skipping " + sentence.sent_id + ": " + e.what());
    return std::nullopt;
  }
  const SubwordId mask = backend.Info().mask_id;
  item.ids = std::move(tok.ids);
  item.spans = std::move(tok.alignment.spans);
  for (std::size_t w : item.masked_words) {
    const Span &span = item.spans.at(w);
    for (std::size_t p = span.start; p < span.end; ++p) {
      item.masked_positions.push_back(p);
      item.gold.push_back(item.ids[p]);
      item.ids[p] = mask;
    }
  }
  return item;
}

void PredictCloze(ClozeItem &item, Backend &backend) {
  if (item.predicted) throw ContractError("cloze item " + item.sent_id + " already predicted");
  if (item.masked_positions.empty()) {
    throw ContractError("cloze item " + item.sent_id + " has no masked positions");
  }
  TopK top = backend.ScoreMasked(item.ids, item.masked_positions, 1);
  if (top.positions.size() != item.masked_positions.size()) {
    throw ContractError("backend returned the wrong number of positions");
  }
  item.predictions.clear();
  for (const CandidateList &list : top.positions) {
    if (list.empty()) throw ContractError("backend returned an empty candidate list");
    item.predictions.push_back(list.front().id);
  }
  item.predicted = true;
}

std::size_t MaskedPositionCount(std::span<const ClozeItem> items) {
  std::size_t n = 0;
  for (const ClozeItem &item : items) n += item.masked_positions.size();
  return n;
}

double ClozeAccuracy(std::span<const ClozeItem> items) {
  std::size_t total = 0;
  std::size_t correct = 0;
  for (const ClozeItem &item : items) {
    if (!item.predicted || item.predictions.size() != item.gold.size()) {
      throw ContractError("cloze item " + item.sent_id + " is not predicted");
    }
    for (std::size_t i = 0; i < item.gold.size(); ++i) {
      correct += item.predictions[i] == item.gold[i];
    }
    total += item.gold.size();
  }
  if (total == 0) throw ContractError("cloze accuracy needs at least one masked position");
  return static_cast<double>(correct) / static_cast<double>(total);
}

std::string RenderCloze(const ClozeItem &item, Backend &backend) {
  if (item.masked_words.empty()) return item.text;
  if (!item.predicted) throw ContractError("cloze item " + item.sent_id + " is not predicted");
  std::string out;
  std::size_t next_mask = 0;
  std::size_t next_pred = 0;
  for (std::size_t w = 0; w < item.words.size(); ++w) {
    if (next_mask < item.masked_words.size() && item.masked_words[next_mask] == w) {
      const std::size_t pieces = item.spans.at(w).size();
      std::span<const SubwordId> guess(item.predictions.data() + next_pred, pieces);
      out += "[" + backend.Detokenize(guess) + "~" + item.words[w] + "]";
      next_pred += pieces;
      ++next_mask;
    } else {
      out += item.words[w];
    }
    if (w + 1 < item.words.size() && item.space_after[w]) out += ' ';
  }
  return out;
}

std::vector<ClozeItem> RunCloze(std::span<const Sentence *const> sentences, Backend &backend,
                                double rate, std::uint64_t run_seed, int threads,
                                RunLog *log) {
  std::vector<std::optional<ClozeItem>> slots(sentences.size());
  ParallelFor(sentences.size(), threads, [&](std::size_t i) {
    const std::uint64_t seed = DeriveSeed(run_seed, i);
    std::vector<std::size_t> picked = SelectMaskWords(*sentences[i], rate, seed);
    std::optional<ClozeItem> item = BuildClozeItem(*sentences[i], picked, backend, log);
    if (!item) return;
    item->sentence_index = i;
    item->rng_seed = seed;
    PredictCloze(*item, backend);
    slots[i] = std::move(item);
  });
  std::vector<ClozeItem> items;
  for (auto &slot : slots) {
    if (slot) items.push_back(std::move(*slot));
  }
  return items;
}

std::string ClozeItemToJson(const ClozeItem &item) {
  json spans = json::array();
  for (const Span &s : item.spans) spans.push_back({s.start, s.end});
  json j = {{"sent_id", item.sent_id},
            {"sentence_index", item.sentence_index},
            {"text", item.text},
            {"words", item.words},
            {"space_after", item.space_after},
            {"rng_seed", item.rng_seed},
            {"masked_words", item.masked_words},
            {"ids", item.ids},
            {"spans", spans},
            {"masked_positions", item.masked_positions},
            {"gold", item.gold},
            {"predictions", item.predictions},
            {"predicted", item.predicted}};
  return j.dump();
}

ClozeItem ClozeItemFromJson(std::string_view line) {
  try {
    json j = json::parse(line);
    ClozeItem item;
    item.sent_id = j.at("sent_id").get<std::string>();
    item.sentence_index = j.at("sentence_index").get<std::size_t>();
    item.text = j.at("text").get<std::string>();
    item.words = j.at("words").get<std::vector<std::string>>();
    item.space_after = j.at("space_after").get<std::vector<bool>>();
    item.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    item.masked_words = j.at("masked_words").get<std::vector<std::size_t>>();
    item.ids = j.at("ids").get<std::vector<SubwordId>>();
    for (const json &s : j.at("spans")) {
      item.spans.push_back({s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>()});
    }
    item.masked_positions = j.at("masked_positions").get<std::vector<std::size_t>>();
    item.gold = j.at("gold").get<std::vector<SubwordId>>();
    item.predictions = j.at("predictions").get<std::vector<SubwordId>>();
    item.predicted = j.at("predicted").get<bool>();
    return item;
  } catch (const json::exception &e) {
    throw ContractError(std::string("bad cloze item: ") + e.what());
  }
}

}  // namespace mlmeval
