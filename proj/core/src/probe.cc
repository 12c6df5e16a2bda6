#include "mlmeval/probe.h"

#include <cmath>
#include <numeric>

#include <json.hpp>

#include "mlmeval/errors.h"
#include "mlmeval/rng.h"

namespace mlmeval {

using json = nlohmann::json;

std::string_view LabelName(AuxLabel label) {
  return label == AuxLabel::kMain ? "MAIN" : "OTHER";
}

AuxLabel LabelFromName(std::string_view name) {
  if (name == "MAIN") return AuxLabel::kMain;
  if (name == "OTHER") return AuxLabel::kOther;
  throw ContractError("unknown label '" + std::string(name) + "'");
}

void ProbeModel::Logits(const std::vector<double> &x, double out[2]) const {
  if (x.size() != static_cast<std::size_t>(hidden_size)) {
    throw ContractError("vector length " + std::to_string(x.size()) +
                        " differs from model input size " + std::to_string(hidden_size));
  }
  double z0 = bias[0];
  double z1 = bias[1];
  for (int j = 0; j < hidden_size; ++j) {
    z0 += weights[2 * j] * x[j];
    z1 += weights[2 * j + 1] * x[j];
  }
  out[0] = z0;
  out[1] = z1;
}

AuxLabel ProbeModel::Predict(const std::vector<double> &x) const {
  double z[2];
  Logits(x, z);
  return z[0] >= z[1] ? AuxLabel::kMain : AuxLabel::kOther;
}

AuxLabel AuxLabelFor(const Sentence &sentence, const Token &aux) {
  const int root = sentence.RootId();
  if (root == 0) throw ContractError("sentence " + sentence.sent_id + " has no unique root");
  return aux.id == root || aux.head == root ? AuxLabel::kMain : AuxLabel::kOther;
}

std::vector<ProbeInstance> ExtractAuxInstances(const Treebank &treebank, Backend &backend,
                                               std::string_view language, RunLog *log) {
  std::vector<ProbeInstance> instances;
  for (const Document &doc : treebank.documents) {
    for (const Sentence &sentence : doc.sentences) {
      std::vector<const Token *> auxes;
      for (const Token &t : sentence.tokens) {
        if (t.upos == "AUX") auxes.push_back(&t);
      }
      if (auxes.empty()) continue;
      if (!sentence.HasUniqueRoot()) {
        if (log) {
          log->Info("probe: skipping " + sentence.sent_id + " (" +
                    std::to_string(sentence.RootCount()) + " roots)");
        }
        continue;
      }
      Tokenized tok;
      try {
        tok = backend.Tokenize(sentence.Forms());
      } catch (const OverflowError &e) {
        if (log) log->Warn("probe: skipping " + sentence.sent_id + ": " + e.what());
        continue;
      }
      std::vector<std::size_t> positions;
      for (const Token *aux : auxes) {
        const Span &span = tok.alignment.spans.at(aux->id - 1);
        for (std::size_t p = span.start; p < span.end; ++p) positions.push_back(p);
      }
      std::vector<std::vector<double>> vectors = backend.Embed(tok.ids, positions);
      std::size_t next = 0;
      for (const Token *aux : auxes) {
        const AuxLabel label = AuxLabelFor(sentence, *aux);
        const Span &span = tok.alignment.spans.at(aux->id - 1);
        for (std::size_t p = span.start; p < span.end; ++p) {
          ProbeInstance inst;
          inst.vector = std::move(vectors.at(next++));
          inst.label = label;
          inst.language = std::string(language);
          inst.source = {sentence.sent_id, aux->id, static_cast<int>(p - span.start)};
          instances.push_back(std::move(inst));
        }
      }
    }
  }
  return instances;
}

std::vector<ProbeInstance> CapTrainSet(std::vector<ProbeInstance> instances,
                                       std::size_t cap, std::uint64_t seed) {
  if (cap < 1) throw ContractError("cap must be >= 1");
  if (instances.size() <= cap) return instances;
  Rng rng(seed);
  std::vector<std::size_t> picked = rng.SampleIndices(instances.size(), cap);
  std::vector<ProbeInstance> out;
  out.reserve(cap);
  for (std::size_t i : picked) out.push_back(std::move(instances[i]));
  return out;
}

ProbeModel TrainProbe(const std::vector<ProbeInstance> &train, const TrainOptions &options) {
  if (train.empty()) throw ContractError("TrainProbe: empty training set");
  if (options.batch_size < 1) throw ContractError("TrainProbe: batch_size must be >= 1");
  const int dim = static_cast<int>(train.front().vector.size());
  for (const ProbeInstance &inst : train) {
    if (inst.vector.size() != static_cast<std::size_t>(dim)) {
      throw ContractError("TrainProbe: inconsistent vector lengths");
    }
  }

  ProbeModel model(dim);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(options.seed);
  std::vector<double> grad_w(2 * dim);

  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    rng.Shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      std::fill(grad_w.begin(), grad_w.end(), 0.0);
      double grad_b[2] = {0.0, 0.0};
      for (std::size_t b = start; b < end; ++b) {
        const ProbeInstance &inst = train[order[b]];
        double z[2];
        model.Logits(inst.vector, z);
        const double m = std::max(z[0], z[1]);
        const double e0 = std::exp(z[0] - m);
        const double e1 = std::exp(z[1] - m);
        const double lse = m + std::log(e0 + e1);
        const int y = static_cast<int>(inst.label);
        loss_sum += lse - z[y];
        const double g0 = e0 / (e0 + e1) - (y == 0 ? 1.0 : 0.0);
        const double g1 = e1 / (e0 + e1) - (y == 1 ? 1.0 : 0.0);
        for (int j = 0; j < dim; ++j) {
          grad_w[2 * j] += g0 * inst.vector[j];
          grad_w[2 * j + 1] += g1 * inst.vector[j];
        }
        grad_b[0] += g0;
        grad_b[1] += g1;
      }
      const double step = options.learning_rate / static_cast<double>(end - start);
      for (std::size_t i = 0; i < grad_w.size(); ++i) model.weights[i] -= step * grad_w[i];
      model.bias[0] -= step * grad_b[0];
      model.bias[1] -= step * grad_b[1];
    }
    const double loss = loss_sum / static_cast<double>(train.size());
    if (!std::isfinite(loss)) throw TrainingError(epoch, "non-finite training loss");
  }
  for (double w : model.weights) {
    if (!std::isfinite(w)) throw TrainingError(options.epochs, "non-finite weights");
  }
  return model;
}

double EvaluateProbe(const ProbeModel &model, const std::vector<ProbeInstance> &test) {
  if (test.empty()) throw ContractError("EvaluateProbe: empty test set");
  std::size_t correct = 0;
  for (const ProbeInstance &inst : test) correct += model.Predict(inst.vector) == inst.label;
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

double MajorityBaseline(const std::vector<ProbeInstance> &test) {
  if (test.empty()) throw ContractError("MajorityBaseline: empty test set");
  std::size_t main = 0;
  for (const ProbeInstance &inst : test) main += inst.label == AuxLabel::kMain;
  const std::size_t other = test.size() - main;
  if (main == other) return 0.5;
  return static_cast<double>(std::max(main, other)) / static_cast<double>(test.size());
}

std::string InstanceToJson(const ProbeInstance &instance) {
  json j = {{"vector", instance.vector},
            {"label", LabelName(instance.label)},
            {"language", instance.language},
            {"source",
             {{"sent_id", instance.source.sent_id},
              {"token_id", instance.source.token_id},
              {"subword_offset", instance.source.subword_offset}}}};
  return j.dump();
}

ProbeInstance InstanceFromJson(std::string_view line) {
  try {
    json j = json::parse(line);
    ProbeInstance inst;
    inst.vector = j.at("vector").get<std::vector<double>>();
    inst.label = LabelFromName(j.at("label").get<std::string>());
    inst.language = j.value("language", std::string());
    const json &src = j.at("source");
    inst.source = {src.at("sent_id").get<std::string>(), src.at("token_id").get<int>(),
                   src.at("subword_offset").get<int>()};
    return inst;
  } catch (const json::exception &e) {
    throw ContractError(std::string("bad probe instance: ") + e.what());
  }
}

std::string ModelToJson(const ProbeModel &model, const TrainOptions &options) {
  json j = {{"hidden_size", model.hidden_size},
            {"weights", model.weights},
            {"bias", {model.bias[0], model.bias[1]}},
            {"epochs", options.epochs},
            {"learning_rate", options.learning_rate},
            {"batch_size", options.batch_size},
            {"seed", options.seed}};
  return j.dump();
}

ProbeModel ModelFromJson(std::string_view text) {
  try {
    json j = json::parse(text);
    ProbeModel model(j.at("hidden_size").get<int>());
    model.weights = j.at("weights").get<std::vector<double>>();
    if (model.weights.size() != 2 * static_cast<std::size_t>(model.hidden_size)) {
      throw ContractError("model weights do not match hidden_size");
    }
    model.bias[0] = j.at("bias").at(0).get<double>();
    model.bias[1] = j.at("bias").at(1).get<double>();
    return model;
  } catch (const json::exception &e) {
    throw ContractError(std::string("bad probe model: ") + e.what());
  }
}

}  // namespace mlmeval
