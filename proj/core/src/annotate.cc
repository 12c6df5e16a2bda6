#include "mlmeval/annotate.h"

#include <chrono>
#include <cmath>
#include <ctime>
#include <istream>
#include <map>
#include <ostream>
#include <set>

#include <json.hpp>

#include "mlmeval/errors.h"
#include "mlmeval/table.h"

namespace mlmeval {
namespace {

using json = nlohmann::json;

constexpr std::array<std::string_view, 4> kClozeCategories = {"match", "mismatch", "copy",
                                                             "gibberish"};
constexpr std::array<std::string_view, 4> kGenerationCategories = {"on-topic", "off-topic",
                                                                  "copy", "gibberish"};

std::string TrimLine(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
  return s.substr(i);
}

void PrintMenu(std::ostream &out, AnnotationTask task) {
  const auto &cats = Categories(task);
  out << " ";
  for (std::size_t i = 0; i < cats.size(); ++i) out << " " << i + 1 << ") " << cats[i];
  out << "   s) skip  q) save and quit\n> " << std::flush;
}

}  // namespace

std::string_view TaskName(AnnotationTask task) {
  return task == AnnotationTask::kCloze ? "CLOZE" : "GENERATION";
}

AnnotationTask TaskFromName(std::string_view name) {
  if (name == "CLOZE") return AnnotationTask::kCloze;
  if (name == "GENERATION") return AnnotationTask::kGeneration;
  throw ContractError("unknown annotation task '" + std::string(name) + "'");
}

const std::array<std::string_view, 4> &Categories(AnnotationTask task) {
  return task == AnnotationTask::kCloze ? kClozeCategories : kGenerationCategories;
}

bool IsCategory(AnnotationTask task, std::string_view category) {
  for (std::string_view c : Categories(task)) {
    if (c == category) return true;
  }
  return false;
}

std::string UtcTimestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<AnnotationRecord> AnnotateSession(std::span<const AnnotationItem> items,
                                              std::span<const AnnotationRecord> prior,
                                              std::istream &in, std::ostream &out,
                                              const SessionOptions &options) {
  std::set<std::string> done;
  for (const AnnotationRecord &r : prior) {
    if (r.annotator == options.annotator) done.insert(r.item_id);
  }
  std::vector<const AnnotationItem *> todo;
  for (const AnnotationItem &item : items) {
    if (!done.count(item.item_id)) todo.push_back(&item);
  }

  std::vector<AnnotationRecord> records;
  if (todo.empty()) {
    out << "Nothing left to annotate.\n";
    return records;
  }
  for (std::size_t i = 0; i < todo.size(); ++i) {
    const AnnotationItem &item = *todo[i];
    out << "\n[" << i + 1 << "/" << todo.size() << "]\n" << item.display << "\n";
    while (true) {
      PrintMenu(out, item.task);
      std::string line;
      if (!std::getline(in, line)) {
        out << "\nInput closed; " << records.size() << " new judgments saved.\n";
        return records;
      }
      line = TrimLine(line);
      if (line == "q") {
        out << records.size() << " new judgments saved.\n";
        return records;
      }
      if (line == "s") break;
      if (line.size() == 1 && line[0] >= '1' && line[0] <= '4') {
        AnnotationRecord record;
        record.item_id = item.item_id;
        record.task = item.task;
        record.category = std::string(Categories(item.task)[line[0] - '1']);
        record.annotator = options.annotator;
        record.timestamp = options.clock ? options.clock() : UtcTimestamp();
        record.language = item.language;
        record.model = item.model;
        if (options.on_record) options.on_record(record);
        records.push_back(std::move(record));
        break;
      }
      out << "Invalid key '" << line << "'.\n";
    }
  }
  out << "\nAll items done; " << records.size() << " new judgments saved.\n";
  return records;
}

double RoundHalfUp(double value, int precision) {
  const double scale = std::pow(10.0, precision);
  return std::floor(value * scale + 0.5 + 1e-9) / scale;
}

std::vector<TableRow> Tabulate(std::span<const AnnotationRecord> records, AnnotationTask task,
                               int precision, std::span<const GroupKey> expected,
                               RunLog *log) {
  const auto &cats = Categories(task);
  std::map<GroupKey, std::array<std::size_t, 4>> counts;
  for (const AnnotationRecord &r : records) {
    if (r.task != task) continue;
    std::size_t k = 0;
    while (k < cats.size() && cats[k] != r.category) ++k;
    if (k == cats.size()) {
      throw ContractError("record " + r.item_id + " has category '" + r.category +
                          "' outside the " + std::string(TaskName(task)) + " set");
    }
    auto [it, fresh] = counts.try_emplace({r.language, r.model});
    if (fresh) it->second.fill(0);
    ++it->second[k];
  }
  for (const GroupKey &g : expected) {
    if (!counts.count(g) && log) {
      log->Warn("tabulate: no " + std::string(TaskName(task)) + " records for " + g.first +
                "/" + g.second + "; row omitted");
    }
  }
  std::vector<TableRow> rows;
  for (const auto &[key, c] : counts) {
    TableRow row;
    row.language = key.first;
    row.model = key.second;
    for (std::size_t v : c) row.n += v;
    for (std::size_t k = 0; k < cats.size(); ++k) {
      CategoryShare share;
      share.category = std::string(cats[k]);
      share.count = c[k];
      share.percent = 100.0 * static_cast<double>(c[k]) / static_cast<double>(row.n);
      share.rounded = RoundHalfUp(share.percent, precision);
      row.shares.push_back(std::move(share));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

Table BuildTable(std::span<const TableRow> rows, AnnotationTask task, int precision) {
  Table table;
  table.header = {"language", "model"};
  for (std::string_view c : Categories(task)) table.header.emplace_back(c);
  table.header.push_back("N");
  for (const TableRow &row : rows) {
    std::vector<std::string> cells = {row.language, row.model};
    for (const CategoryShare &s : row.shares) {
      cells.push_back(FormatFixed(s.rounded, precision) + "%");
    }
    cells.push_back(std::to_string(row.n));
    table.rows.push_back(std::move(cells));
  }
  return table;
}

}  // namespace

std::string FormatTableTsv(std::span<const TableRow> rows, AnnotationTask task, int precision) {
  return BuildTable(rows, task, precision).Tsv();
}

std::string FormatTableText(std::span<const TableRow> rows, AnnotationTask task,
                            int precision) {
  return BuildTable(rows, task, precision).Text();
}

std::string RecordToJson(const AnnotationRecord &record) {
  json j = {{"item_id", record.item_id},     {"task", TaskName(record.task)},
            {"category", record.category},   {"annotator", record.annotator},
            {"timestamp", record.timestamp}, {"language", record.language},
            {"model", record.model}};
  return j.dump();
}

AnnotationRecord RecordFromJson(std::string_view line) {
  AnnotationRecord r;
  try {
    json j = json::parse(line);
    r.item_id = j.at("item_id").get<std::string>();
    r.task = TaskFromName(j.at("task").get<std::string>());
    r.category = j.at("category").get<std::string>();
    r.annotator = j.at("annotator").get<std::string>();
    r.timestamp = j.value("timestamp", std::string());
    r.language = j.value("language", std::string());
    r.model = j.value("model", std::string());
  } catch (const json::exception &e) {
    throw ContractError(std::string("bad annotation record: ") + e.what());
  }
  if (!IsCategory(r.task, r.category)) {
    throw ContractError("annotation record " + r.item_id + ": category '" + r.category +
                        "' not valid for " + std::string(TaskName(r.task)));
  }
  return r;
}

}  // namespace mlmeval
