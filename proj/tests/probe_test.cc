#include <doctest.h>

#include <cmath>
#include <limits>
#include <set>

#include "mlmeval/conllu.h"
#include "mlmeval/errors.h"
#include "mlmeval/probe.h"
#include "mlmeval/rng.h"
#include "mlmeval/toy_backends.h"
#include "support/separable.h"
#include "support/synthetic_corpus.h"

using namespace mlmeval;

namespace {

// Independent full-batch softmax regression, written from the textbook
// update: W <- W - lr * mean_i (softmax(W^T x_i + b) - onehot(y_i)) x_i^T.
struct Oracle {
  std::vector<std::vector<double>> w;  // [class][dim]
  double b[2] = {0, 0};
};

Oracle FullBatchOracle(const std::vector<ProbeInstance> &data, int epochs, double lr) {
  const std::size_t dim = data[0].vector.size();
  Oracle o;
  o.w.assign(2, std::vector<double>(dim, 0.0));
  for (int e = 0; e < epochs; ++e) {
    std::vector<std::vector<double>> g(2, std::vector<double>(dim, 0.0));
    double gb[2] = {0, 0};
    for (const ProbeInstance &inst : data) {
      double z[2];
      for (int c = 0; c < 2; ++c) {
        z[c] = o.b[c];
        for (std::size_t j = 0; j < dim; ++j) z[c] += o.w[c][j] * inst.vector[j];
      }
      const double p1 = 1.0 / (1.0 + std::exp(z[0] - z[1]));
      const double p[2] = {1.0 - p1, p1};
      for (int c = 0; c < 2; ++c) {
        const double d = p[c] - (static_cast<int>(inst.label) == c ? 1.0 : 0.0);
        for (std::size_t j = 0; j < dim; ++j) g[c][j] += d * inst.vector[j];
        gb[c] += d;
      }
    }
    const double n = static_cast<double>(data.size());
    for (int c = 0; c < 2; ++c) {
      for (std::size_t j = 0; j < dim; ++j) o.w[c][j] -= lr * g[c][j] / n;
      o.b[c] -= lr * gb[c] / n;
    }
  }
  return o;
}

double BruteMajority(const std::vector<ProbeInstance> &test) {
  std::size_t counts[2] = {0, 0};
  for (const auto &i : test) ++counts[static_cast<int>(i.label)];
  if (counts[0] == counts[1]) return 0.5;
  return static_cast<double>(counts[0] > counts[1] ? counts[0] : counts[1]) /
         static_cast<double>(test.size());
}

}  // namespace

TEST_SUITE("probe") {

TEST_CASE("label names") {
  CHECK(LabelName(AuxLabel::kMain) == "MAIN");
  CHECK(LabelFromName("OTHER") == AuxLabel::kOther);
  CHECK_THROWS_AS(LabelFromName("main"), ContractError);
}

TEST_CASE("AUX labels follow attachment to the root") {
  Treebank tb = ParseConlluFile(MLMEVAL_FIXTURE_DIR "/small.conllu");
  const Sentence &n1 = tb.documents[0].sentences[0];
  CHECK(AuxLabelFor(n1, n1.tokens[2]) == AuxLabel::kMain);
  const Sentence &n3 = tb.documents[0].sentences[2];
  CHECK(AuxLabelFor(n3, n3.tokens[2]) == AuxLabel::kMain);
  Treebank odd = ParseConllu(
      "1\tdog\t_\tNOUN\t_\t_\t3\tnsubj\t_\t_\n"
      "2\tis\t_\tAUX\t_\t_\t1\tacl\t_\t_\n"
      "3\tcan\t_\tAUX\t_\t_\t0\troot\t_\t_\n");
  const Sentence &s = *odd.Sentences()[0];
  CHECK(AuxLabelFor(s, s.tokens[1]) == AuxLabel::kOther);
  CHECK(AuxLabelFor(s, s.tokens[2]) == AuxLabel::kMain);
  Treebank two_roots = ParseConllu(
      "1\tis\t_\tAUX\t_\t_\t0\troot\t_\t_\n2\tgood\t_\tADJ\t_\t_\t0\troot\t_\t_\n");
  CHECK_THROWS_AS(AuxLabelFor(*two_roots.Sentences()[0], two_roots.Sentences()[0]->tokens[0]),
                  ContractError);
}

TEST_CASE("instances: one per AUX subword, one embed call per sentence") {
  testing::SynthOptions o;
  o.docs = 3;
  Treebank tb = ParseConllu(testing::SynthConllu(o));
  ToyOptions opts;
  opts.hidden_size = 12;
  auto toy = MakeUnigramBackend(tb.Sentences(), opts);
  CountingBackend counting(*toy);
  RunLog log;
  auto instances = ExtractAuxInstances(tb, counting, "xx", &log);
  std::size_t aux = 0, with_aux = 0;
  for (const Sentence *s : tb.Sentences()) {
    std::size_t here = 0;
    for (const Token &t : s->tokens) here += t.upos == "AUX";
    aux += here;
    with_aux += here > 0;
  }
  CHECK(instances.size() == aux);  // whole-word vocabulary: one piece each
  CHECK(counting.embed_calls() == with_aux);
  for (const auto &inst : instances) {
    CHECK(inst.vector.size() == 12);
    CHECK(inst.language == "xx");
  }
}

TEST_CASE("multi-piece AUX words yield one instance per piece") {
  Treebank tb = ParseConllu(
      "1\tshe\t_\tPRON\t_\t_\t3\tnsubj\t_\t_\n"
      "2\tshouldnt\t_\tAUX\t_\t_\t3\taux\t_\t_\n"
      "3\tgo\t_\tVERB\t_\t_\t0\troot\t_\t_\n");
  std::vector<std::string> pieces = {"she", "should", "##nt", "go"};
  ToyOptions opts;
  opts.hidden_size = 4;
  auto echo = MakeEchoBackend(tb.Sentences(), opts, pieces);
  auto instances = ExtractAuxInstances(tb, *echo);
  REQUIRE(instances.size() == 2);
  CHECK(instances[0].source.subword_offset == 0);
  CHECK(instances[1].source.subword_offset == 1);
  CHECK(instances[1].source.token_id == 2);
  CHECK(instances[1].label == AuxLabel::kMain);
}

TEST_CASE("zero epochs leave an all-zero model") {
  auto set = testing::MakeSeparable(10, 40, 10, 1.0, 3);
  TrainOptions opts;
  opts.epochs = 0;
  ProbeModel m = TrainProbe(set.train, opts);
  for (double w : m.weights) CHECK(w == 0.0);
  CHECK(m.bias[0] == 0.0);
  CHECK(m.bias[1] == 0.0);
  // Ties go to MAIN.
  CHECK(m.Predict(set.test[1].vector) == AuxLabel::kMain);
}

TEST_CASE("full-batch training matches an independent oracle") {
  auto set = testing::MakeSeparable(6, 64, 1, 1.0, 8);
  for (int epochs : {1, 2, 7}) {
    TrainOptions opts;
    opts.epochs = epochs;
    opts.learning_rate = 0.05;
    opts.batch_size = 64;
    ProbeModel m = TrainProbe(set.train, opts);
    Oracle o = FullBatchOracle(set.train, epochs, 0.05);
    for (int j = 0; j < 6; ++j) {
      for (int c = 0; c < 2; ++c) CHECK(m.W(j, c) == doctest::Approx(o.w[c][j]).epsilon(1e-10));
    }
    CHECK(m.bias[0] == doctest::Approx(o.b[0]).epsilon(1e-10));
  }
}

TEST_CASE("separable data is learned") {
  auto set = testing::MakeSeparable(32, 500, 500, 1.0, 17);
  for (const auto &inst : set.test) {
    CHECK(std::abs(testing::SignedDistance(set.normal, inst.vector)) >= 1.0 - 1e-9);
  }
  ProbeModel m = TrainProbe(set.train, TrainOptions{});
  CHECK(EvaluateProbe(m, set.test) >= 0.99);
}

TEST_CASE("property: swapping labels swaps the weight columns") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto set = testing::MakeSeparable(5, 50, 1, 0.5, seed);
    auto swapped = set.train;
    for (auto &inst : swapped) {
      inst.label = inst.label == AuxLabel::kMain ? AuxLabel::kOther : AuxLabel::kMain;
    }
    TrainOptions opts;
    opts.epochs = 3;
    opts.seed = seed;
    ProbeModel a = TrainProbe(set.train, opts);
    ProbeModel b = TrainProbe(swapped, opts);
    for (int j = 0; j < 5; ++j) {
      CHECK(a.W(j, 0) == doctest::Approx(b.W(j, 1)).epsilon(1e-12));
      CHECK(a.W(j, 1) == doctest::Approx(b.W(j, 0)).epsilon(1e-12));
    }
  }
}

TEST_CASE("training is reproducible per seed") {
  auto set = testing::MakeSeparable(8, 100, 1, 1.0, 4);
  TrainOptions opts;
  opts.epochs = 4;
  opts.seed = 12;
  CHECK(TrainProbe(set.train, opts).weights == TrainProbe(set.train, opts).weights);
  TrainOptions other = opts;
  other.seed = 13;
  CHECK(TrainProbe(set.train, opts).weights != TrainProbe(set.train, other).weights);
}

TEST_CASE("non-finite inputs abort training") {
  auto set = testing::MakeSeparable(3, 10, 1, 1.0, 2);
  set.train[4].vector[1] = std::numeric_limits<double>::quiet_NaN();
  try {
    TrainProbe(set.train, TrainOptions{});
    FAIL("expected TrainingError");
  } catch (const TrainingError &e) {
    CHECK(e.epoch() == 1);
  }
}

TEST_CASE("training preconditions") {
  std::vector<ProbeInstance> none;
  CHECK_THROWS_AS(TrainProbe(none, TrainOptions{}), ContractError);
  auto set = testing::MakeSeparable(3, 10, 1, 1.0, 2);
  set.train[2].vector.push_back(0.0);
  CHECK_THROWS_AS(TrainProbe(set.train, TrainOptions{}), ContractError);
  ProbeModel m(3);
  CHECK_THROWS_AS(m.Predict({1.0}), ContractError);
}

TEST_CASE("property: majority baseline equals brute-force class frequency") {
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ProbeInstance> test(1 + rng.UniformIndex(60));
    const double p = rng.UniformDouble();
    for (auto &inst : test) {
      inst.label = rng.UniformDouble() < p ? AuxLabel::kMain : AuxLabel::kOther;
    }
    CHECK(MajorityBaseline(test) == BruteMajority(test));
  }
  std::vector<ProbeInstance> tie(4);
  tie[0].label = tie[1].label = AuxLabel::kOther;
  CHECK(MajorityBaseline(tie) == 0.5);
}

TEST_CASE("training cap samples a seeded subset") {
  auto set = testing::MakeSeparable(2, 50, 1, 1.0, 5);
  auto capped = CapTrainSet(set.train, 20, 7);
  CHECK(capped.size() == 20);
  auto again = CapTrainSet(set.train, 20, 7);
  for (std::size_t i = 0; i < 20; ++i) CHECK(capped[i].source == again[i].source);
  std::set<std::string> ids;
  for (const auto &inst : capped) ids.insert(inst.source.sent_id);
  CHECK(ids.size() == 20);
  CHECK(CapTrainSet(set.train, 500, 7).size() == 50);
  CHECK_THROWS_AS(CapTrainSet(set.train, 0, 7), ContractError);
}

TEST_CASE("instances and models survive JSON") {
  auto set = testing::MakeSeparable(4, 10, 1, 1.0, 6);
  set.train[0].language = "de";
  set.train[0].source = {"s9", 3, 1};
  ProbeInstance back = InstanceFromJson(InstanceToJson(set.train[0]));
  CHECK(back.vector == set.train[0].vector);
  CHECK(back.label == set.train[0].label);
  CHECK(back.language == "de");
  CHECK(back.source == set.train[0].source);

  TrainOptions opts;
  opts.epochs = 2;
  ProbeModel m = TrainProbe(set.train, opts);
  ProbeModel m2 = ModelFromJson(ModelToJson(m, opts));
  CHECK(m2.weights == m.weights);
  CHECK(m2.bias[1] == m.bias[1]);
  CHECK_THROWS_AS(ModelFromJson(R"({"hidden_size": 3, "weights": [1], "bias": [0, 0]})"),
                  ContractError);
  CHECK_THROWS_AS(InstanceFromJson("{}"), ContractError);
}

}
