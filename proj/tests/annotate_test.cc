#include <doctest.h>

#include <cmath>
#include <sstream>

#include "mlmeval/annotate.h"
#include "mlmeval/errors.h"
#include "mlmeval/rng.h"

using namespace mlmeval;

namespace {

std::vector<AnnotationItem> Items(AnnotationTask task, int n, const std::string &model = "m") {
  std::vector<AnnotationItem> items;
  for (int i = 0; i < n; ++i) {
    items.push_back({"item" + std::to_string(i), task, "display " + std::to_string(i), "en", model});
  }
  return items;
}

SessionOptions Fixed(const std::string &annotator) {
  SessionOptions o;
  o.annotator = annotator;
  o.clock = [] { return std::string("2026-01-01T00:00:00Z"); };
  return o;
}

std::vector<AnnotationRecord> Synthetic(const std::string &language, const std::string &model,
                                        AnnotationTask task, std::vector<std::size_t> counts) {
  std::vector<AnnotationRecord> out;
  int id = 0;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    for (std::size_t i = 0; i < counts[c]; ++i) {
      AnnotationRecord r;
      r.item_id = language + model + std::to_string(id++);
      r.task = task;
      r.category = std::string(Categories(task)[c]);
      r.annotator = "a";
      r.language = language;
      r.model = model;
      out.push_back(r);
    }
  }
  return out;
}

}  // namespace

TEST_SUITE("annotate") {

TEST_CASE("category sets and task names") {
  CHECK(Categories(AnnotationTask::kCloze)[0] == "match");
  CHECK(Categories(AnnotationTask::kCloze)[3] == "gibberish");
  CHECK(Categories(AnnotationTask::kGeneration)[1] == "off-topic");
  CHECK(IsCategory(AnnotationTask::kGeneration, "copy"));
  CHECK_FALSE(IsCategory(AnnotationTask::kCloze, "on-topic"));
  CHECK(TaskFromName(TaskName(AnnotationTask::kGeneration)) == AnnotationTask::kGeneration);
  CHECK_THROWS_AS(TaskFromName("cloze"), ContractError);
}

TEST_CASE("keys map to categories in order") {
  auto items = Items(AnnotationTask::kCloze, 5);
  std::istringstream in("1\n2\n3\n4\ns\n");
  std::ostringstream out;
  auto records = AnnotateSession(items, {}, in, out, Fixed("ann"));
  REQUIRE(records.size() == 4);
  CHECK(records[0].category == "match");
  CHECK(records[1].category == "mismatch");
  CHECK(records[2].category == "copy");
  CHECK(records[3].category == "gibberish");
  CHECK(records[3].item_id == "item3");
  CHECK(records[0].annotator == "ann");
  CHECK(records[0].timestamp == "2026-01-01T00:00:00Z");
  CHECK(records[0].model == "m");
  CHECK(out.str().find("[5/5]") != std::string::npos);
}

TEST_CASE("the annotator never sees ids or model names") {
  auto items = Items(AnnotationTask::kGeneration, 2, "secret-model");
  std::istringstream in("1\n1\n");
  std::ostringstream out;
  AnnotateSession(items, {}, in, out, Fixed("ann"));
  CHECK(out.str().find("secret-model") == std::string::npos);
  CHECK(out.str().find("item0") == std::string::npos);
  CHECK(out.str().find("display 0") != std::string::npos);
  CHECK(out.str().find("on-topic") != std::string::npos);
}

TEST_CASE("invalid keys re-prompt, q quits, EOF ends") {
  auto items = Items(AnnotationTask::kCloze, 3);
  {
    std::istringstream in("9\nhello\n 2 \nq\n1\n");
    std::ostringstream out;
    auto records = AnnotateSession(items, {}, in, out, Fixed("a"));
    REQUIRE(records.size() == 1);
    CHECK(records[0].category == "mismatch");
    CHECK(out.str().find("Invalid key '9'") != std::string::npos);
  }
  {
    std::istringstream in("3\n");
    std::ostringstream out;
    auto records = AnnotateSession(items, {}, in, out, Fixed("a"));
    CHECK(records.size() == 1);
  }
}

TEST_CASE("records are streamed as they are made") {
  auto items = Items(AnnotationTask::kCloze, 3);
  std::istringstream in("1\n2\n");
  std::ostringstream out;
  std::vector<std::string> streamed;
  SessionOptions o = Fixed("a");
  o.on_record = [&](const AnnotationRecord &r) { streamed.push_back(r.item_id); };
  AnnotateSession(items, {}, in, out, o);
  CHECK(streamed == std::vector<std::string>{"item0", "item1"});
}

TEST_CASE("prior judgments by the same annotator are skipped") {
  auto items = Items(AnnotationTask::kCloze, 3);
  std::vector<AnnotationRecord> prior(2);
  prior[0].item_id = "item0";
  prior[0].annotator = "a";
  prior[1].item_id = "item1";
  prior[1].annotator = "someone else";
  std::istringstream in("4\n4\n4\n");
  std::ostringstream out;
  auto records = AnnotateSession(items, prior, in, out, Fixed("a"));
  REQUIRE(records.size() == 2);
  CHECK(records[0].item_id == "item1");
  CHECK(records[1].item_id == "item2");

  std::vector<AnnotationRecord> all = prior;
  all.insert(all.end(), records.begin(), records.end());
  all[1].annotator = "a";
  std::istringstream none("1\n");
  std::ostringstream out2;
  CHECK(AnnotateSession(items, all, none, out2, Fixed("a")).empty());
  CHECK(out2.str().find("Nothing left to annotate.") != std::string::npos);
}

TEST_CASE("round half up") {
  CHECK(RoundHalfUp(0.5, 0) == 1.0);
  CHECK(RoundHalfUp(1.5, 0) == 2.0);
  CHECK(RoundHalfUp(2.5, 0) == 3.0);
  CHECK(RoundHalfUp(1.3333, 0) == 1.0);
  CHECK(RoundHalfUp(88.0, 0) == 88.0);
  CHECK(RoundHalfUp(86.025, 2) == doctest::Approx(86.03));
}

TEST_CASE("tabulation counts, percentages and grouping") {
  auto records = Synthetic("en", "mono", AnnotationTask::kCloze, {132, 14, 2, 2});
  auto de = Synthetic("de", "multi", AnnotationTask::kCloze, {1, 1, 1, 1});
  records.insert(records.end(), de.begin(), de.end());
  auto gen = Synthetic("en", "mono", AnnotationTask::kGeneration, {5, 0, 0, 0});
  records.insert(records.end(), gen.begin(), gen.end());

  auto rows = Tabulate(records, AnnotationTask::kCloze);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].language == "de");  // groups sorted
  CHECK(rows[1].n == 150);
  CHECK(rows[1].shares[0].count == 132);
  CHECK(rows[1].shares[0].percent == doctest::Approx(88.0));
  CHECK(rows[1].shares[1].rounded == 9.0);
  CHECK(rows[0].shares[2].rounded == 25.0);

  std::string tsv = FormatTableTsv(rows, AnnotationTask::kCloze);
  CHECK(tsv.find("language\tmodel\tmatch\tmismatch\tcopy\tgibberish\tN\n") == 0);
  CHECK(tsv.find("en\tmono\t88%\t9%\t1%\t1%\t150\n") != std::string::npos);
}

TEST_CASE("missing groups are warned about, foreign categories rejected") {
  auto records = Synthetic("en", "mono", AnnotationTask::kCloze, {1, 0, 0, 0});
  RunLog log;
  std::vector<GroupKey> expected = {{"en", "mono"}, {"fi", "multi"}};
  auto rows = Tabulate(records, AnnotationTask::kCloze, 0, expected, &log);
  CHECK(rows.size() == 1);
  CHECK(log.warnings() == 1);
  records[0].category = "on-topic";
  CHECK_THROWS_AS(Tabulate(records, AnnotationTask::kCloze), ContractError);
}

TEST_CASE("property: unrounded shares sum to 100") {
  Rng rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::size_t> counts(4);
    for (auto &c : counts) c = rng.UniformIndex(40);
    counts[rng.UniformIndex(4)] += 1;
    auto rows = Tabulate(Synthetic("x", "y", AnnotationTask::kGeneration, counts),
                         AnnotationTask::kGeneration, 1);
    REQUIRE(rows.size() == 1);
    double sum = 0.0;
    for (const auto &s : rows[0].shares) sum += s.percent;
    CHECK(std::abs(sum - 100.0) <= 1e-9);
  }
}

TEST_CASE("records survive JSON and are validated") {
  AnnotationRecord r{"id1", AnnotationTask::kGeneration, "off-topic", "ann", "t", "de", "mono"};
  AnnotationRecord back = RecordFromJson(RecordToJson(r));
  CHECK(back.item_id == "id1");
  CHECK(back.task == AnnotationTask::kGeneration);
  CHECK(back.category == "off-topic");
  CHECK(back.model == "mono");
  CHECK_THROWS_AS(RecordFromJson(R"({"item_id":"a","task":"CLOZE","category":"on-topic","annotator":"x"})"),
                  ContractError);
  CHECK_THROWS_AS(RecordFromJson("nope"), ContractError);
}

}
