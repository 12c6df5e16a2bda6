#include "mlmeval/harness.h"

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "mlmeval/cloze.h"
#include "mlmeval/errors.h"
#include "mlmeval/generate.h"
#include "mlmeval/probe.h"
#include "mlmeval/toy_backends.h"
#include "mlmeval/wire.h"

namespace mlmeval {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

void WriteFile(const fs::path &path, const std::string &content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string ReadFile(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string JoinLines(const std::vector<std::string> &lines) {
  std::string out;
  for (const std::string &l : lines) out += l + '\n';
  return out;
}

ToyOptions ToyOptionsFor(const RunConfig &config) {
  ToyOptions options;
  options.hidden_size = config.hidden_size;
  options.max_seq_len = config.max_seq_len;
  options.lowercases = config.lowercase;
  options.embed_seed = config.seed;
  return options;
}

std::string ModelLabel(const RunConfig &config) {
  return config.model.empty() ? config.backend : config.model;
}

struct LoadedCorpus {
  Treebank train;
  Treebank test;
  std::vector<const Sentence *> all;
};

void RunProbe(const RunConfig &config, const fs::path &dir, LoadedCorpus &corpus,
              Backend &backend, RunLog &log) {
  std::vector<ProbeInstance> train =
      ExtractAuxInstances(corpus.train, backend, config.language, &log);
  std::vector<ProbeInstance> test =
      ExtractAuxInstances(corpus.test, backend, config.language, &log);
  log.Info("probe: " + std::to_string(train.size()) + " train / " +
           std::to_string(test.size()) + " test instances before capping");
  if (train.empty() || test.empty()) {
    throw ContractError("probe: no AUX instances in the train or test treebank");
  }
  train = CapTrainSet(std::move(train), config.cap, config.seed);

  TrainOptions options;
  options.epochs = config.epochs;
  options.learning_rate = config.learning_rate;
  options.batch_size = config.batch_size;
  options.seed = config.seed;
  ProbeModel model = TrainProbe(train, options);
  const double accuracy = EvaluateProbe(model, test);
  const double baseline = MajorityBaseline(test);

  std::string items;
  for (const auto &[split, set] : {std::pair{"train", &train}, std::pair{"test", &test}}) {
    for (const ProbeInstance &inst : *set) {
      json j = json::parse(InstanceToJson(inst));
      j["split"] = split;
      items += j.dump() + '\n';
    }
  }
  WriteFile(dir / "items.jsonl", items);
  WriteFile(dir / "model.json", ModelToJson(model, options) + '\n');
  json metrics = {{"task", "probe"},          {"accuracy", accuracy},
                  {"baseline", baseline},     {"n", test.size()},
                  {"n_train", train.size()},  {"language", config.language},
                  {"model", ModelLabel(config)}};
  WriteFile(dir / "metrics.json", metrics.dump(2) + '\n');
}

void RunClozeTask(const RunConfig &config, const fs::path &dir, LoadedCorpus &corpus,
                  Backend &backend, RunLog &log) {
  std::vector<const Sentence *> sentences =
      FilterSentences(corpus.train, config.min_tokens, config.max_tokens);
  log.Info("cloze: " + std::to_string(sentences.size()) + " sentences within " +
           std::to_string(config.min_tokens) + "-" + std::to_string(config.max_tokens) +
           " tokens");
  std::vector<ClozeItem> items =
      RunCloze(sentences, backend, config.mask_rate, config.seed, config.threads, &log);
  const double accuracy = ClozeAccuracy(items);

  std::string lines;
  std::string rendered;
  std::string annotation;
  for (const ClozeItem &item : items) {
    lines += ClozeItemToJson(item) + '\n';
    const std::string text = RenderCloze(item, backend);
    rendered += text + '\n';
    std::size_t pred = 0;
    for (std::size_t w : item.masked_words) {
      const std::size_t pieces = item.spans[w].size();
      std::span<const SubwordId> guess(item.predictions.data() + pred, pieces);
      pred += pieces;
      json a = {{"item_id", config.language + "/" + ModelLabel(config) + "/" + item.sent_id +
                                "/w" + std::to_string(w + 1)},
                {"task", "CLOZE"},
                {"display", text + "\n  judge: [" + backend.Detokenize(guess) + "~" +
                                item.words[w] + "]"},
                {"language", config.language},
                {"model", ModelLabel(config)}};
      annotation += a.dump() + '\n';
    }
  }
  WriteFile(dir / "items.jsonl", lines);
  WriteFile(dir / "rendered.txt", rendered);
  WriteFile(dir / "annotation_items.jsonl", annotation);
  json metrics = {{"task", "cloze"},
                  {"subword_accuracy", accuracy},
                  {"n_masked", MaskedPositionCount(items)},
                  {"n_items", items.size()},
                  {"n_skipped", sentences.size() - items.size()},
                  {"language", config.language},
                  {"model", ModelLabel(config)}};
  WriteFile(dir / "metrics.json", metrics.dump(2) + '\n');
}

void RunGenerateTask(const RunConfig &config, const fs::path &dir, LoadedCorpus &corpus,
                     Backend &backend, RunLog &log) {
  std::vector<GenerationTask> tasks =
      SampleTasks(corpus.train, backend, config.n_docs, config.per_doc, config.seed, &log);
  GibbsOptions options;
  options.max_iterations = config.max_iterations;
  options.burn_in = config.burn_in;
  options.top_k = config.top_k;
  options.temperature = config.temperature;
  std::vector<GenerationResult> results =
      RunGeneration(tasks, backend, options, config.threads);

  std::string lines;
  std::string sheet;
  std::string annotation;
  std::size_t converged = 0;
  double iterations = 0.0;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    lines += GenerationToJson(tasks[i], results[i], options) + '\n';
    const std::string context = ContextSheetLine(tasks[i], results[i]);
    sheet += context + '\n';
    json a = {{"item_id", config.language + "/" + ModelLabel(config) + "/" + tasks[i].sent_id},
              {"task", "GENERATION"},
              {"display", context},
              {"language", config.language},
              {"model", ModelLabel(config)}};
    annotation += a.dump() + '\n';
    converged += results[i].converged;
    iterations += results[i].iterations_used;
  }
  WriteFile(dir / "items.jsonl", lines);
  WriteFile(dir / "contexts.txt", sheet);
  WriteFile(dir / "annotation_items.jsonl", annotation);
  json metrics = {{"task", "generate"},
                  {"n_tasks", tasks.size()},
                  {"n_converged", converged},
                  {"mean_iterations", tasks.empty() ? 0.0 : iterations / tasks.size()},
                  {"language", config.language},
                  {"model", ModelLabel(config)}};
  WriteFile(dir / "metrics.json", metrics.dump(2) + '\n');
}

}  // namespace

std::string ConfigToJson(const RunConfig &c) {
  json j = {{"task", c.task},
            {"train", c.train_path},
            {"test", c.test_path},
            {"backend", c.backend},
            {"seed", c.seed},
            {"out", c.out_dir},
            {"language", c.language},
            {"model", c.model},
            {"threads", c.threads},
            {"epochs", c.epochs},
            {"learning_rate", c.learning_rate},
            {"batch_size", c.batch_size},
            {"cap", c.cap},
            {"mask_rate", c.mask_rate},
            {"min_tokens", c.min_tokens},
            {"max_tokens", c.max_tokens},
            {"n_docs", c.n_docs},
            {"per_doc", c.per_doc},
            {"max_iterations", c.max_iterations},
            {"burn_in", c.burn_in},
            {"top_k", c.top_k},
            {"temperature", c.temperature},
            {"hidden_size", c.hidden_size},
            {"max_seq_len", c.max_seq_len},
            {"lowercase", c.lowercase}};
  return j.dump(2);
}

RunConfig ConfigFromJson(std::string_view text) {
  try {
    json j = json::parse(text);
    RunConfig c;
    c.task = j.value("task", c.task);
    c.train_path = j.value("train", c.train_path);
    c.test_path = j.value("test", c.test_path);
    c.backend = j.value("backend", c.backend);
    c.seed = j.value("seed", c.seed);
    c.out_dir = j.value("out", c.out_dir);
    c.language = j.value("language", c.language);
    c.model = j.value("model", c.model);
    c.threads = j.value("threads", c.threads);
    c.epochs = j.value("epochs", c.epochs);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.cap = j.value("cap", c.cap);
    c.mask_rate = j.value("mask_rate", c.mask_rate);
    c.min_tokens = j.value("min_tokens", c.min_tokens);
    c.max_tokens = j.value("max_tokens", c.max_tokens);
    c.n_docs = j.value("n_docs", c.n_docs);
    c.per_doc = j.value("per_doc", c.per_doc);
    c.max_iterations = j.value("max_iterations", c.max_iterations);
    c.burn_in = j.value("burn_in", c.burn_in);
    c.top_k = j.value("top_k", c.top_k);
    c.temperature = j.value("temperature", c.temperature);
    c.hidden_size = j.value("hidden_size", c.hidden_size);
    c.max_seq_len = j.value("max_seq_len", c.max_seq_len);
    c.lowercase = j.value("lowercase", c.lowercase);
    return c;
  } catch (const json::exception &e) {
    throw ContractError(std::string("bad run config: ") + e.what());
  }
}

std::unique_ptr<Backend> MakeBackend(const RunConfig &config,
                                     std::span<const Sentence *const> corpus) {
  const std::string &spec = config.backend;
  if (spec == "toy-echo") return MakeEchoBackend(corpus, ToyOptionsFor(config));
  if (spec == "toy-unigram") {
    if (corpus.empty()) throw ContractError("toy-unigram backend needs a non-empty corpus");
    return MakeUnigramBackend(corpus, ToyOptionsFor(config));
  }
  if (spec.rfind("wire:", 0) == 0 && spec.size() > 5) return ConnectBackend(spec.substr(5));
  throw ContractError("unknown backend '" + spec +
                      "' (expected toy-echo, toy-unigram or wire:<endpoint>)");
}

fs::path Run(const RunConfig &config, std::ostream *echo) {
  if (config.out_dir.empty()) throw ContractError("run needs an output directory");
  const fs::path dir(config.out_dir);
  fs::create_directories(dir);
  fs::remove(dir / "INCOMPLETE");
  WriteFile(dir / "config.json", ConfigToJson(config) + '\n');

  RunLog log(echo);
  try {
    if (config.task != "probe" && config.task != "cloze" && config.task != "generate") {
      throw ContractError("unknown task '" + config.task + "'");
    }
    LoadedCorpus corpus;
    if (!config.train_path.empty()) corpus.train = ParseConlluFile(config.train_path);
    if (!config.test_path.empty()) corpus.test = ParseConlluFile(config.test_path);
    if (config.task == "probe" && (config.train_path.empty() || config.test_path.empty())) {
      throw ContractError("probe needs both a train and a test treebank");
    }
    if (config.task != "probe" && config.train_path.empty()) {
      throw ContractError(config.task + " needs a train treebank");
    }
    for (const Sentence *s : corpus.train.Sentences()) corpus.all.push_back(s);
    for (const Sentence *s : corpus.test.Sentences()) corpus.all.push_back(s);
    log.Info("loaded " + std::to_string(corpus.train.SentenceCount()) + " train and " +
             std::to_string(corpus.test.SentenceCount()) + " test sentences");

    std::unique_ptr<Backend> backend = MakeBackend(config, corpus.all);
    if (config.task == "probe") {
      RunProbe(config, dir, corpus, *backend, log);
    } else if (config.task == "cloze") {
      RunClozeTask(config, dir, corpus, *backend, log);
    } else {
      RunGenerateTask(config, dir, corpus, *backend, log);
    }
    log.Info("done");
    WriteFile(dir / "log.txt", JoinLines(log.lines()));
  } catch (const std::exception &e) {
    log.Warn(std::string("run failed: ") + e.what());
    WriteFile(dir / "log.txt", JoinLines(log.lines()));
    WriteFile(dir / "INCOMPLETE", std::string(e.what()) + '\n');
    throw;
  }
  return dir;
}

Report EmitReport(std::span<const fs::path> run_dirs) {
  Report report;
  report.probe.header = {"language", "model", "test acc.", "baseline"};
  auto warn = [&](const std::string &message) {
    ++report.warnings;
    report.messages.push_back(message);
  };
  if (run_dirs.empty()) warn("no run directories given");

  // language -> model -> accuracy, keeping first-seen order.
  std::vector<std::string> cloze_languages;
  std::vector<std::string> cloze_models;
  std::map<std::pair<std::string, std::string>, double> cloze_values;

  for (const fs::path &dir : run_dirs) {
    json metrics;
    try {
      if (fs::exists(dir / "INCOMPLETE")) {
        warn(dir.string() + ": run is incomplete; skipped");
        continue;
      }
      metrics = json::parse(ReadFile(dir / "metrics.json"));
    } catch (const std::exception &e) {
      warn(dir.string() + ": no readable metrics.json; skipped");
      continue;
    }
    const std::string task = metrics.value("task", std::string());
    const std::string language = metrics.value("language", std::string());
    const std::string model = metrics.value("model", std::string());
    if (task == "probe" && metrics.contains("accuracy") && metrics.contains("baseline")) {
      report.probe.rows.push_back({language, model,
                                   FormatFixed(100.0 * metrics["accuracy"].get<double>(), 2),
                                   FormatFixed(100.0 * metrics["baseline"].get<double>(), 2)});
    } else if (task == "cloze" && metrics.contains("subword_accuracy")) {
      if (std::find(cloze_languages.begin(), cloze_languages.end(), language) ==
          cloze_languages.end()) {
        cloze_languages.push_back(language);
      }
      if (std::find(cloze_models.begin(), cloze_models.end(), model) == cloze_models.end()) {
        cloze_models.push_back(model);
      }
      cloze_values[{language, model}] = metrics["subword_accuracy"].get<double>();
    } else if (task == "generate") {
      continue;
    } else {
      warn(dir.string() + ": metrics lack the fields for a report row; skipped");
    }
  }

  report.cloze.header = {"language"};
  for (const std::string &m : cloze_models) report.cloze.header.push_back(m);
  for (const std::string &language : cloze_languages) {
    std::vector<std::string> row = {language};
    for (const std::string &m : cloze_models) {
      auto it = cloze_values.find({language, m});
      row.push_back(it == cloze_values.end() ? "" : FormatFixed(100.0 * it->second, 2));
    }
    report.cloze.rows.push_back(std::move(row));
  }
  return report;
}

std::vector<std::string> ReadLines(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(std::move(line));
  }
  return lines;
}

std::vector<AnnotationItem> LoadAnnotationItems(const fs::path &run_dir) {
  std::vector<AnnotationItem> items;
  for (const std::string &line : ReadLines(run_dir / "annotation_items.jsonl")) {
    try {
      json j = json::parse(line);
      AnnotationItem item;
      item.item_id = j.at("item_id").get<std::string>();
      item.task = TaskFromName(j.at("task").get<std::string>());
      item.display = j.at("display").get<std::string>();
      item.language = j.value("language", std::string());
      item.model = j.value("model", std::string());
      items.push_back(std::move(item));
    } catch (const json::exception &e) {
      throw ContractError(run_dir.string() + ": bad annotation item: " + e.what());
    }
  }
  return items;
}

std::vector<AnnotationRecord> ReadRecords(const fs::path &path) {
  std::vector<AnnotationRecord> records;
  if (!fs::exists(path)) return records;
  for (const std::string &line : ReadLines(path)) records.push_back(RecordFromJson(line));
  return records;
}

void AppendRecord(const fs::path &path, const AnnotationRecord &record) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw std::runtime_error("cannot append to " + path.string());
  out << RecordToJson(record) << '\n' << std::flush;
}

}  // namespace mlmeval
