// mlmeval command line: run tasks, annotate outputs, assemble reports and
// serve a toy backend over the wire protocol.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <httplib.h>

#include "mlmeval/annotate.h"
#include "mlmeval/conllu.h"
#include "mlmeval/errors.h"
#include "mlmeval/harness.h"
#include "mlmeval/rng.h"
#include "mlmeval/toy_backends.h"
#include "mlmeval/wire.h"

namespace fs = std::filesystem;
using namespace mlmeval;

namespace {

constexpr int kExitRuntime = 2;

void AddCommonFlags(CLI::App *cmd, RunConfig &c) {
  cmd->add_option("--train", c.train_path, "training treebank (CoNLL-U)");
  cmd->add_option("--backend", c.backend,
                  "toy-echo | toy-unigram | wire:<url or command> (env MLMEVAL_BACKEND)")
      ->envname(kBackendEnvVar);
  cmd->add_option("--seed", c.seed, "run seed");
  cmd->add_option("--out", c.out_dir, "run directory")->required();
  cmd->add_option("--language", c.language, "language label for reports");
  cmd->add_option("--model", c.model, "model label for reports");
  cmd->add_option("--threads", c.threads, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--hidden-size,--hidden_size", c.hidden_size, "toy embedding width")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--max-seq-len,--max_seq_len", c.max_seq_len, "toy maximum sequence length")
      ->check(CLI::PositiveNumber);
  cmd->add_flag("--lowercase", c.lowercase, "toy backends lowercase their input");
}

std::vector<AnnotationItem> LoadItems(const std::vector<std::string> &dirs) {
  std::vector<AnnotationItem> items;
  for (const std::string &d : dirs) {
    std::vector<AnnotationItem> part = LoadAnnotationItems(d);
    items.insert(items.end(), part.begin(), part.end());
  }
  return items;
}

int Annotate(const std::vector<std::string> &dirs, const std::string &records_path,
             const std::string &annotator, std::uint64_t seed, bool tabulate, int precision) {
  std::vector<AnnotationRecord> prior = ReadRecords(records_path);
  if (tabulate) {
    RunLog log(&std::cerr);
    for (AnnotationTask task : {AnnotationTask::kCloze, AnnotationTask::kGeneration}) {
      std::vector<TableRow> rows = Tabulate(prior, task, precision, {}, &log);
      if (rows.empty()) continue;
      std::cout << TaskName(task) << "\n" << FormatTableText(rows, task, precision) << "\n";
    }
    return 0;
  }
  std::vector<AnnotationItem> items = LoadItems(dirs);
  // Mixing models and languages in a seeded order keeps the annotator blind.
  Rng rng(seed);
  rng.Shuffle(items);
  SessionOptions options;
  options.annotator = annotator;
  options.on_record = [&](const AnnotationRecord &r) { AppendRecord(records_path, r); };
  AnnotateSession(items, prior, std::cin, std::cout, options);
  return 0;
}

int ReportCmd(const std::vector<std::string> &dirs, const std::string &annotations,
              int precision, bool tsv) {
  std::vector<fs::path> paths(dirs.begin(), dirs.end());
  Report report = EmitReport(paths);
  for (const std::string &m : report.messages) std::cerr << "warning: " << m << "\n";
  if (!report.probe.rows.empty()) {
    std::cout << "AUX probe\n" << (tsv ? report.probe.Tsv() : report.probe.Text()) << "\n";
  }
  if (!report.cloze.rows.empty()) {
    std::cout << "Cloze subword accuracy (%)\n"
              << (tsv ? report.cloze.Tsv() : report.cloze.Text()) << "\n";
  }
  if (!annotations.empty()) {
    std::vector<AnnotationRecord> records = ReadRecords(annotations);
    RunLog log(&std::cerr);
    for (AnnotationTask task : {AnnotationTask::kCloze, AnnotationTask::kGeneration}) {
      std::vector<TableRow> rows = Tabulate(records, task, precision, {}, &log);
      if (rows.empty()) continue;
      std::cout << TaskName(task) << "\n"
                << (tsv ? FormatTableTsv(rows, task, precision)
                        : FormatTableText(rows, task, precision))
                << "\n";
    }
  }
  return 0;
}

int Serve(const std::string &kind, const std::vector<std::string> &train, ToyOptions opts,
          int http_port) {
  // Corpora in the order given, like a run's train + test.
  std::vector<Treebank> banks;
  banks.reserve(train.size());
  std::vector<const Sentence *> corpus;
  for (const std::string &path : train) {
    banks.push_back(ParseConlluFile(path));
    for (const Sentence *s : banks.back().Sentences()) corpus.push_back(s);
  }
  std::unique_ptr<Backend> backend;
  if (kind == "toy-echo") {
    backend = MakeEchoBackend(corpus, opts);
  } else if (kind == "toy-unigram") {
    backend = MakeUnigramBackend(corpus, opts);
  } else {
    throw ContractError("serve supports toy-echo and toy-unigram, not '" + kind + "'");
  }
  if (http_port < 0) {
    ServeLines(*backend, std::cin, std::cout);
    return 0;
  }
  httplib::Server server;
  std::mutex mu;
  server.Post("/v1/rpc", [&](const httplib::Request &req, httplib::Response &res) {
    std::lock_guard<std::mutex> lock(mu);
    res.set_content(HandleWireRequest(*backend, req.body), "application/json");
  });
  std::cerr << "listening on 127.0.0.1:" << http_port << "\n";
  if (!server.listen("127.0.0.1", http_port)) {
    throw ConnectionError("cannot listen on port " + std::to_string(http_port));
  }
  return 0;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Masked language model evaluation harness"};
  app.require_subcommand(1);

  RunConfig probe_cfg, cloze_cfg, gen_cfg;
  probe_cfg.task = "probe";
  cloze_cfg.task = "cloze";
  gen_cfg.task = "generate";

  CLI::App *probe = app.add_subcommand("probe", "train and test the AUX linear probe");
  AddCommonFlags(probe, probe_cfg);
  probe->get_option("--train")->required();
  probe->add_option("--test", probe_cfg.test_path, "test treebank (CoNLL-U)")->required();
  probe->add_option("--epochs", probe_cfg.epochs)->check(CLI::NonNegativeNumber);
  probe->add_option("--learning-rate,--learning_rate", probe_cfg.learning_rate);
  probe->add_option("--batch-size,--batch_size", probe_cfg.batch_size)
      ->check(CLI::PositiveNumber);
  probe->add_option("--cap", probe_cfg.cap, "maximum training instances");

  CLI::App *cloze = app.add_subcommand("cloze", "masked-word prediction");
  AddCommonFlags(cloze, cloze_cfg);
  cloze->get_option("--train")->required();
  cloze->add_option("--mask-rate,--mask_rate", cloze_cfg.mask_rate)->check(CLI::Range(0.0, 1.0));
  cloze->add_option("--min-tokens,--min_tokens", cloze_cfg.min_tokens);
  cloze->add_option("--max-tokens,--max_tokens", cloze_cfg.max_tokens);

  CLI::App *gen = app.add_subcommand("generate", "Gibbs sentence generation");
  AddCommonFlags(gen, gen_cfg);
  gen->get_option("--train")->required();
  gen->add_option("--n-docs,--n_docs", gen_cfg.n_docs);
  gen->add_option("--per-doc,--per_doc", gen_cfg.per_doc);
  gen->add_option("--max-iterations,--max_iterations", gen_cfg.max_iterations)
      ->check(CLI::NonNegativeNumber);
  gen->add_option("--burn-in,--burn_in", gen_cfg.burn_in)->check(CLI::NonNegativeNumber);
  gen->add_option("--top-k,--top_k", gen_cfg.top_k)->check(CLI::PositiveNumber);
  gen->add_option("--temperature", gen_cfg.temperature)->check(CLI::PositiveNumber);

  std::vector<std::string> ann_dirs;
  std::string records_path, annotator = "anonymous";
  std::uint64_t ann_seed = 1;
  bool tabulate = false;
  int ann_precision = 0;
  CLI::App *ann = app.add_subcommand("annotate", "judge cloze and generation outputs");
  ann->add_option("runs", ann_dirs, "run directories with annotation_items.jsonl");
  ann->add_option("--records", records_path, "append-only judgments file (JSONL)")->required();
  ann->add_option("--annotator", annotator);
  ann->add_option("--seed", ann_seed, "presentation order seed");
  ann->add_flag("--tabulate", tabulate, "print category tables instead of annotating");
  ann->add_option("--precision", ann_precision, "decimals in tables")
      ->check(CLI::NonNegativeNumber);

  std::vector<std::string> rep_dirs;
  std::string rep_annotations;
  int rep_precision = 0;
  bool rep_tsv = false;
  CLI::App *rep = app.add_subcommand("report", "assemble result tables from run directories");
  rep->add_option("runs", rep_dirs, "run directories");
  rep->add_option("--annotations", rep_annotations, "judgments file to tabulate");
  rep->add_option("--precision", rep_precision, "decimals in annotation tables")
      ->check(CLI::NonNegativeNumber);
  rep->add_flag("--tsv", rep_tsv, "tab-separated output");

  std::string serve_kind = "toy-unigram";
  std::vector<std::string> serve_train;
  ToyOptions serve_opts;
  int serve_port = -1;
  CLI::App *serve = app.add_subcommand("serve", "serve a toy backend over the wire protocol");
  serve->add_option("--backend", serve_kind, "toy-echo | toy-unigram");
  serve->add_option("--train", serve_train, "corpora for the toy vocabulary (repeatable)")
      ->required();
  serve->add_flag("--lowercase", serve_opts.lowercases);
  serve->add_option("--hidden-size,--hidden_size", serve_opts.hidden_size)
      ->check(CLI::PositiveNumber);
  serve->add_option("--max-seq-len,--max_seq_len", serve_opts.max_seq_len)
      ->check(CLI::PositiveNumber);
  serve->add_option("--embed-seed,--embed_seed", serve_opts.embed_seed);
  serve->add_option("--http", serve_port, "listen on this port instead of stdio");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    RunConfig *run = probe->parsed() ? &probe_cfg
                     : cloze->parsed() ? &cloze_cfg
                     : gen->parsed()   ? &gen_cfg
                                       : nullptr;
    if (run) {
      fs::path dir = Run(*run, &std::cerr);
      std::cout << dir.string() << "\n";
      return 0;
    }
    if (ann->parsed()) {
      return Annotate(ann_dirs, records_path, annotator, ann_seed, tabulate, ann_precision);
    }
    if (rep->parsed()) return ReportCmd(rep_dirs, rep_annotations, rep_precision, rep_tsv);
    if (serve->parsed()) return Serve(serve_kind, serve_train, serve_opts, serve_port);
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
