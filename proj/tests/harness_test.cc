#include <doctest.h>

#include <sstream>

#include <json.hpp>

#include "mlmeval/errors.h"
#include "mlmeval/harness.h"
#include "support/synthetic_corpus.h"
#include "support/temp_dir.h"

using namespace mlmeval;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

RunConfig Config(const std::string &task, const testing::TempDir &dir, const std::string &out) {
  testing::SynthOptions train_opts, test_opts;
  train_opts.seed = 1;
  test_opts.seed = 2;
  test_opts.docs = 2;
  RunConfig c;
  c.task = task;
  c.train_path = dir.Write("train.conllu", testing::SynthConllu(train_opts));
  c.test_path = dir.Write("test.conllu", testing::SynthConllu(test_opts));
  c.out_dir = (dir.path() / out).string();
  c.language = "en";
  c.model = "toy";
  c.hidden_size = 16;
  c.epochs = 5;
  c.n_docs = 4;
  c.max_iterations = 60;
  c.burn_in = 20;
  c.top_k = 5;
  return c;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("every task is byte-for-byte reproducible") {
  testing::TempDir dir("determinism");
  for (const std::string task : {"probe", "cloze", "generate"}) {
    CAPTURE(task);
    RunConfig a = Config(task, dir, task + "-a");
    RunConfig b = Config(task, dir, task + "-b");
    b.threads = 3;
    Run(a);
    Run(b);
    for (const char *file : {"items.jsonl", "metrics.json"}) {
      const std::string left = testing::Slurp(fs::path(a.out_dir) / file);
      CHECK(!left.empty());
      CHECK(left == testing::Slurp(fs::path(b.out_dir) / file));
    }
    CHECK(fs::exists(fs::path(a.out_dir) / "config.json"));
    CHECK(fs::exists(fs::path(a.out_dir) / "log.txt"));
    CHECK_FALSE(fs::exists(fs::path(a.out_dir) / "INCOMPLETE"));
  }
}

TEST_CASE("run artifacts") {
  testing::TempDir dir("artifacts");
  RunConfig c = Config("cloze", dir, "cloze");
  c.backend = "toy-echo";
  Run(c);
  json m = json::parse(testing::Slurp(fs::path(c.out_dir) / "metrics.json"));
  CHECK(m["subword_accuracy"] == 1.0);
  CHECK(m["model"] == "toy");
  auto items = LoadAnnotationItems(c.out_dir);
  CHECK(items.size() == m["n_masked"].get<std::size_t>());
  CHECK(items[0].task == AnnotationTask::kCloze);
  CHECK(items[0].display.find("judge: [") != std::string::npos);
  CHECK(ReadLines(fs::path(c.out_dir) / "rendered.txt").size() == m["n_items"].get<std::size_t>());

  RunConfig g = Config("generate", dir, "gen");
  Run(g);
  auto gen_items = LoadAnnotationItems(g.out_dir);
  CHECK(gen_items.size() == ReadLines(fs::path(g.out_dir) / "items.jsonl").size());
  CHECK(gen_items[0].display.find(" **") != std::string::npos);
  RunConfig back = ConfigFromJson(testing::Slurp(fs::path(g.out_dir) / "config.json"));
  CHECK(ConfigToJson(back) == ConfigToJson(g));
}

TEST_CASE("a failed run leaves INCOMPLETE") {
  testing::TempDir dir("failure");
  RunConfig c = Config("cloze", dir, "bad");
  c.backend = "toy-nonsense";
  CHECK_THROWS_AS(Run(c), ContractError);
  CHECK(fs::exists(fs::path(c.out_dir) / "INCOMPLETE"));
  CHECK(fs::exists(fs::path(c.out_dir) / "log.txt"));
  RunConfig p = Config("probe", dir, "noprobe");
  p.test_path.clear();
  CHECK_THROWS_AS(Run(p), ContractError);
  RunConfig t = Config("translate", dir, "notask");
  CHECK_THROWS_AS(Run(t), ContractError);
}

TEST_CASE("a wire backend gives the same cloze numbers as the in-process one") {
  testing::TempDir dir("wire");
  RunConfig local = Config("cloze", dir, "local");
  RunConfig remote = Config("cloze", dir, "remote");
  // The served vocabulary must come from the same corpus (train + test).
  remote.backend = std::string("wire:") + MLMEVAL_CLI_PATH +
                   " serve --backend toy-unigram --train " + remote.train_path + " --train " +
                   remote.test_path;
  Run(local);
  Run(remote);
  CHECK(testing::Slurp(fs::path(local.out_dir) / "items.jsonl") ==
        testing::Slurp(fs::path(remote.out_dir) / "items.jsonl"));
  CHECK(testing::Slurp(fs::path(local.out_dir) / "metrics.json") ==
        testing::Slurp(fs::path(remote.out_dir) / "metrics.json"));
}

TEST_CASE("report tables") {
  testing::TempDir dir("report");
  auto metrics = [&](const std::string &name, const json &j) {
    fs::create_directories(dir.path() / name);
    dir.Write(name + "/metrics.json", j.dump());
    return dir.path() / name;
  };
  std::vector<fs::path> runs = {
      metrics("c1", {{"task", "cloze"}, {"subword_accuracy", 0.8603}, {"language", "en"}, {"model", "mono"}}),
      metrics("c2", {{"task", "cloze"}, {"subword_accuracy", 0.5}, {"language", "en"}, {"model", "multi"}}),
      metrics("c3", {{"task", "cloze"}, {"subword_accuracy", 0.25}, {"language", "de"}, {"model", "multi"}}),
      metrics("p1", {{"task", "probe"}, {"accuracy", 0.9}, {"baseline", 0.6}, {"language", "en"}, {"model", "multi"}}),
      dir.path() / "missing",
  };
  fs::create_directories(dir.path() / "broken");
  dir.Write("broken/INCOMPLETE", "boom\n");
  runs.push_back(dir.path() / "broken");

  Report r = EmitReport(runs);
  CHECK(r.warnings == 2);
  REQUIRE(r.cloze.rows.size() == 2);
  CHECK(r.cloze.header == std::vector<std::string>{"language", "mono", "multi"});
  CHECK(r.cloze.rows[0] == std::vector<std::string>{"en", "86.03", "50.00"});
  CHECK(r.cloze.rows[1] == std::vector<std::string>{"de", "", "25.00"});
  REQUIRE(r.probe.rows.size() == 1);
  CHECK(r.probe.rows[0] == std::vector<std::string>{"en", "multi", "90.00", "60.00"});
  CHECK(r.cloze.Tsv().find("en\t86.03\t50.00\n") != std::string::npos);

  CHECK(EmitReport({}).warnings == 1);
}

TEST_CASE("end-to-end annotation of ten generated items") {
  testing::TempDir dir("session");
  RunConfig g = Config("generate", dir, "gen");
  g.n_docs = 5;
  g.per_doc = 2;
  Run(g);
  auto items = LoadAnnotationItems(g.out_dir);
  REQUIRE(items.size() == 10);
  const fs::path store = dir.path() / "judgments.jsonl";
  std::istringstream keys("1\n2\n3\n4\n1\n1\n2\n4\n4\n3\n");
  std::ostringstream screen;
  SessionOptions opts;
  opts.annotator = "ann";
  opts.on_record = [&](const AnnotationRecord &r) { AppendRecord(store, r); };
  AnnotateSession(items, ReadRecords(store), keys, screen, opts);
  auto records = ReadRecords(store);
  REQUIRE(records.size() == 10);
  auto rows = Tabulate(records, AnnotationTask::kGeneration);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].n == 10);
  CHECK(rows[0].shares[0].count == 3);
  CHECK(rows[0].shares[3].count == 3);
  CHECK(rows[0].shares[0].rounded == 30.0);
  // A second session has nothing left.
  std::istringstream more("1\n");
  std::ostringstream screen2;
  CHECK(AnnotateSession(items, records, more, screen2, opts).empty());
}

TEST_CASE("annotation records append and read back") {
  testing::TempDir dir("records");
  const fs::path file = dir.path() / "judgments.jsonl";
  CHECK(ReadRecords(file).empty());
  AnnotationRecord r{"a/b/s1", AnnotationTask::kCloze, "copy", "ann", "t", "en", "mono"};
  AppendRecord(file, r);
  r.item_id = "a/b/s2";
  AppendRecord(file, r);
  auto back = ReadRecords(file);
  REQUIRE(back.size() == 2);
  CHECK(back[1].item_id == "a/b/s2");
  CHECK(back[0].category == "copy");
}

}
