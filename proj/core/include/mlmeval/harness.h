#ifndef MLMEVAL_HARNESS_H_
#define MLMEVAL_HARNESS_H_

// Run orchestration. Every run directory holds:
//   config.json   resolved RunConfig
//   items.jsonl   per-item artifacts (probe instances, cloze items, generations)
//   metrics.json  task metrics
//   log.txt       run log
// plus task extras (model.json, rendered.txt, contexts.txt,
// annotation_items.jsonl). A failed run leaves an INCOMPLETE marker.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mlmeval/annotate.h"
#include "mlmeval/conllu.h"
#include "mlmeval/run_log.h"
#include "mlmeval/scorer.h"
#include "mlmeval/table.h"

namespace mlmeval {

inline constexpr const char *kBackendEnvVar = "MLMEVAL_BACKEND";

struct RunConfig {
  std::string task;  // probe | cloze | generate
  std::string train_path;
  std::string test_path;
  // toy-echo | toy-unigram | wire:<http://host:port or shell command>
  std::string backend = "toy-unigram";
  std::uint64_t seed = 1;
  std::string out_dir;
  std::string language;  // report labels
  std::string model;
  int threads = 1;

  // probe
  int epochs = 50;
  double learning_rate = 0.01;
  int batch_size = 32;
  std::size_t cap = 3031;

  // cloze
  double mask_rate = 0.15;
  std::size_t min_tokens = 5;
  std::size_t max_tokens = 50;

  // generate
  std::size_t n_docs = 30;
  std::size_t per_doc = 2;
  int max_iterations = 500;
  int burn_in = 250;
  int top_k = 100;
  double temperature = 1.0;

  // toy backends
  int hidden_size = 768;
  int max_seq_len = 512;
  bool lowercase = false;
};

std::string ConfigToJson(const RunConfig &config);
RunConfig ConfigFromJson(std::string_view text);

// Builds the backend named by config.backend. Toy backends are built over
// `corpus`.
std::unique_ptr<Backend> MakeBackend(const RunConfig &config,
                                     std::span<const Sentence *const> corpus);

// Executes config.task end to end and returns the run directory. On failure
// writes INCOMPLETE (with the error) and log.txt, then rethrows.
std::filesystem::path Run(const RunConfig &config, std::ostream *echo = nullptr);

struct Report {
  Table probe;  // language, model, test acc., baseline
  Table cloze;  // language, one column per model
  std::size_t warnings = 0;
  std::vector<std::string> messages;
};

// Assembles result tables from run directories; percentages with two
// decimals. Directories without metrics are skipped with a warning, and
// an empty list is itself a warning.
Report EmitReport(std::span<const std::filesystem::path> run_dirs);

// Annotation items written by cloze (one per masked word) and generate
// (one per task) runs.
std::vector<AnnotationItem> LoadAnnotationItems(const std::filesystem::path &run_dir);
std::vector<AnnotationRecord> ReadRecords(const std::filesystem::path &path);
void AppendRecord(const std::filesystem::path &path, const AnnotationRecord &record);

// Lines of a JSONL file, skipping blank lines.
std::vector<std::string> ReadLines(const std::filesystem::path &path);

}  // namespace mlmeval

#endif  // MLMEVAL_HARNESS_H_
