#ifndef MLMEVAL_PROBE_H_
#define MLMEVAL_PROBE_H_

// Main-auxiliary diagnostic classifier: AUX words are labelled by whether
// they attach to the root of their sentence, every subword of such a word
// becomes one (embedding, label) instance, and a two-class softmax layer is
// trained on the raw final-layer vectors.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mlmeval/conllu.h"
#include "mlmeval/run_log.h"
#include "mlmeval/scorer.h"

namespace mlmeval {

enum class AuxLabel : int { kMain = 0, kOther = 1 };

std::string_view LabelName(AuxLabel label);
AuxLabel LabelFromName(std::string_view name);

struct InstanceSource {
  std::string sent_id;
  int token_id = 0;
  int subword_offset = 0;  // within the word
  bool operator==(const InstanceSource &) const = default;
};

struct ProbeInstance {
  std::vector<double> vector;
  AuxLabel label = AuxLabel::kMain;
  std::string language;
  InstanceSource source;
};

// Row-major hidden_size x 2 weights, one column per class.
struct ProbeModel {
  int hidden_size = 0;
  std::vector<double> weights;
  double bias[2] = {0.0, 0.0};

  explicit ProbeModel(int dim = 0) : hidden_size(dim), weights(2 * dim, 0.0) {}

  double &W(int row, int cls) { return weights[2 * row + cls]; }
  double W(int row, int cls) const { return weights[2 * row + cls]; }
  // Throws ContractError on a length mismatch.
  void Logits(const std::vector<double> &x, double out[2]) const;
  // Equal logits resolve to kMain.
  AuxLabel Predict(const std::vector<double> &x) const;
};

struct TrainOptions {
  int epochs = 50;
  double learning_rate = 0.01;
  int batch_size = 32;
  std::uint64_t seed = 0;
};

inline constexpr std::size_t kDefaultTrainCap = 3031;

// Label rule for one AUX token: kMain when its head is the unique root or
// it is the root itself. Requires a sentence with a unique root.
AuxLabel AuxLabelFor(const Sentence &sentence, const Token &aux);

// Instances for every AUX word in every uniquely-rooted sentence. One embed
// call per sentence over the unmasked word sequence. Sentences with no
// unique root or that overflow max_seq_len are skipped and logged.
std::vector<ProbeInstance> ExtractAuxInstances(const Treebank &treebank, Backend &backend,
                                               std::string_view language = "",
                                               RunLog *log = nullptr);

// Seeded uniform sample of `cap` instances (all of them when under the cap),
// in random order.
std::vector<ProbeInstance> CapTrainSet(std::vector<ProbeInstance> instances,
                                       std::size_t cap, std::uint64_t seed);

// Mini-batch SGD on mean cross-entropy from an all-zero start, reshuffling
// each epoch with the seeded generator. Throws TrainingError on a
// non-finite loss.
ProbeModel TrainProbe(const std::vector<ProbeInstance> &train, const TrainOptions &options);

// Fraction of instances whose predicted class equals the label.
double EvaluateProbe(const ProbeModel &model, const std::vector<ProbeInstance> &test);

// Frequency of the more frequent label; 0.5 on an exact tie.
double MajorityBaseline(const std::vector<ProbeInstance> &test);

// JSONL / JSON persistence.
std::string InstanceToJson(const ProbeInstance &instance);
ProbeInstance InstanceFromJson(std::string_view line);
std::string ModelToJson(const ProbeModel &model, const TrainOptions &options);
ProbeModel ModelFromJson(std::string_view text);

}  // namespace mlmeval

#endif  // MLMEVAL_PROBE_H_
