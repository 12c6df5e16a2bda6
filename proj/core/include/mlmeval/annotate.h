#ifndef MLMEVAL_ANNOTATE_H_
#define MLMEVAL_ANNOTATE_H_

#include <array>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mlmeval/run_log.h"

namespace mlmeval {

enum class AnnotationTask { kCloze, kGeneration };

std::string_view TaskName(AnnotationTask task);  // "CLOZE" / "GENERATION"
AnnotationTask TaskFromName(std::string_view name);

// Categories in key order 1-4.
const std::array<std::string_view, 4> &Categories(AnnotationTask task);
bool IsCategory(AnnotationTask task, std::string_view category);

// Something to judge. `display` is what the annotator sees; language and
// model are carried through to the record but never shown.
struct AnnotationItem {
  std::string item_id;
  AnnotationTask task = AnnotationTask::kCloze;
  std::string display;
  std::string language;
  std::string model;
};

struct AnnotationRecord {
  std::string item_id;
  AnnotationTask task = AnnotationTask::kCloze;
  std::string category;
  std::string annotator;
  std::string timestamp;  // ISO-8601, UTC
  std::string language;
  std::string model;
};

struct SessionOptions {
  std::string annotator = "anonymous";
  // Defaults to the current UTC time.
  std::function<std::string()> clock;
  // Called as soon as each record is made, so an append-only store never
  // loses a judgment when the session is interrupted.
  std::function<void(const AnnotationRecord &)> on_record;
};

// Presents every item this annotator has not judged yet. Keys: 1-4 pick a
// category, s skips, q quits; anything else re-prompts. End of input ends
// the session. Returns only the new records.
std::vector<AnnotationRecord> AnnotateSession(std::span<const AnnotationItem> items,
                                              std::span<const AnnotationRecord> prior,
                                              std::istream &in, std::ostream &out,
                                              const SessionOptions &options);

std::string UtcTimestamp();

struct CategoryShare {
  std::string category;
  std::size_t count = 0;
  double percent = 0.0;  // unrounded
  double rounded = 0.0;
};

struct TableRow {
  std::string language;
  std::string model;
  std::size_t n = 0;
  std::vector<CategoryShare> shares;  // in category order
};

using GroupKey = std::pair<std::string, std::string>;  // (language, model)

// Per (language, model) group, the share of each category among the
// records of `task`, rounded half-up to `precision` decimals. Rows are
// ordered by group. Groups listed in `expected` that have no records are
// omitted with a warning.
std::vector<TableRow> Tabulate(std::span<const AnnotationRecord> records, AnnotationTask task,
                               int precision = 0, std::span<const GroupKey> expected = {},
                               RunLog *log = nullptr);

double RoundHalfUp(double value, int precision);

std::string FormatTableTsv(std::span<const TableRow> rows, AnnotationTask task, int precision = 0);
std::string FormatTableText(std::span<const TableRow> rows, AnnotationTask task,
                            int precision = 0);

std::string RecordToJson(const AnnotationRecord &record);
// Throws ContractError on a bad line or a category outside the task's set.
AnnotationRecord RecordFromJson(std::string_view line);

}  // namespace mlmeval

#endif  // MLMEVAL_ANNOTATE_H_
