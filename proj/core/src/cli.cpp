#include "sectrc/cli.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sectrc/chains.hpp"
#include "sectrc/checkpoint.hpp"
#include "sectrc/corpus.hpp"
#include "sectrc/evaluation.hpp"
#include "sectrc/manifest.hpp"
#include "sectrc/synthetic.hpp"
#include "sectrc/training.hpp"
#include "sectrc/version.hpp"

namespace sectrc::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Argument problems CLI11 cannot see (e.g. a non-integer --k value).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write file: " + path.string());
  os << content;
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

std::string fmt4(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

LabelSet load_labels_or_default(const std::string& path) {
  return path.empty() ? LabelSet::english_td() : LabelSet::load(path);
}

// ---- splitting ------------------------------------------------------------

struct SplitOpts {
  std::string manifest_path;  // fixed split file; empty means cross-validation
  int folds = 5;
  int fold = 0;
  double dev_fraction = 0.15;
  uint64_t seed = 42;
};

void add_split_options(CLI::App* cmd, SplitOpts& o) {
  cmd->add_option("--split", o.manifest_path, "fixed split manifest (train/dev/test id lists)");
  cmd->add_option("--folds", o.folds, "cross-validation fold count")->check(CLI::PositiveNumber);
  cmd->add_option("--fold", o.fold, "which fold to run");
  cmd->add_option("--dev-fraction", o.dev_fraction, "share of training documents held out as dev");
  cmd->add_option("--seed", o.seed, "seed for the document split");
}

Split make_split(const std::vector<Document>& docs, const SplitOpts& o) {
  SplitSpec spec;
  if (!o.manifest_path.empty()) {
    spec.mode = SplitMode::FixedManifest;
    spec.manifest_path = o.manifest_path;
    return split_corpus(docs, spec).at(0);
  }
  spec.mode = SplitMode::CrossValidation;
  spec.folds = o.folds;
  spec.dev_fraction = o.dev_fraction;
  spec.seed = o.seed;
  auto splits = split_corpus(docs, spec);
  if (o.fold < 0 || o.fold >= static_cast<int>(splits.size()))
    throw std::invalid_argument("fold " + std::to_string(o.fold) + " out of range (folds=" +
                                std::to_string(splits.size()) + ")");
  return splits[o.fold];
}

std::string split_to_json(const Split& split) {
  auto ids = [](const std::vector<Document>& docs) {
    json a = json::array();
    for (const auto& d : docs) a.push_back(d.doc_id);
    return a;
  };
  json j;
  j["train"] = ids(split.train);
  j["dev"] = ids(split.dev);
  j["test"] = ids(split.test);
  return j.dump(2) + "\n";
}

// ---- train/ablate configuration --------------------------------------------

struct TrainCliOpts {
  std::string corpus;
  std::string outdir;
  std::string labels_path;
  std::string config_path;  // consumed by the pre-scan; registered for help only
  std::string model;
  std::string strategy;
  std::string k;  // integer or "auto"
  int seeds_n = 0;
  SplitOpts split;
};

void add_train_options(CLI::App* cmd, TrainCliOpts& o, TrainConfig& cfg, bool with_model) {
  cmd->add_option("corpus", o.corpus, "corpus JSONL file")->required();
  cmd->add_option("-o,--out", o.outdir, "output directory")->required();
  cmd->add_option("--labels", o.labels_path, "label set JSON file");
  cmd->add_option("--config", o.config_path,
                  "JSON config file; command-line flags override its values");
  if (with_model)
    cmd->add_option("--model", o.model, "model kind")
        ->check(CLI::IsMember({"sec", "local", "multi"}));
  cmd->add_option("--strategy", o.strategy, "encoder freeze schedule")
      ->check(CLI::IsMember({"no-freeze", "freeze", "freeze-after-k"}));
  cmd->add_option("--k", o.k, "freeze boundary epoch, an integer or 'auto'");
  cmd->add_option("--seeds", o.seeds_n, "run seeds 1..N")->check(CLI::PositiveNumber);
  cmd->add_option("--epochs", cfg.epochs, "chain model epochs")->check(CLI::PositiveNumber);
  cmd->add_option("--fine-tune-epochs", cfg.fine_tune_epochs, "pair baseline epochs")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--chains-per-batch", cfg.chains_per_batch, "")->check(CLI::PositiveNumber);
  cmd->add_option("--pairs-per-batch", cfg.pairs_per_batch, "")->check(CLI::PositiveNumber);
  cmd->add_option("--lr", cfg.lr, "learning rate");
  cmd->add_option("--weight-decay", cfg.weight_decay, "decoupled weight decay");
  cmd->add_option("--dropout", cfg.dropout, "dropout on pair embeddings");
  cmd->add_option("--dim", cfg.dim, "embedding width")->check(CLI::PositiveNumber);
  cmd->add_option("--grad-clip", cfg.grad_clip, "global gradient-norm clip; 0 disables");
  cmd->add_flag("--invert-links,!--no-invert-links", cfg.invert_links,
                "add inverted event-target links before chain building");
  cmd->add_flag("--include-derived,!--no-include-derived", cfg.include_derived,
                "score inverted links too");
  cmd->add_flag("--mean-pool,!--no-mean-pool", cfg.mean_pool, "mean span pooling");
  cmd->add_flag("--layer2-zeros,!--no-layer2-zeros", cfg.layer2_zeros,
                "zero-initialize the second recurrent layer");
  cmd->add_flag("--per-category-mean,!--no-per-category-mean", cfg.per_category_mean,
                "average each category's loss instead of summing");
  add_split_options(cmd, o.split);
}

bool all_digits(const std::string& s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isdigit(c) != 0; });
}

TrainConfig finalize_train_config(TrainConfig cfg, const TrainCliOpts& o) {
  if (!o.model.empty()) cfg.model_kind = model_kind_from_string(o.model);
  if (!o.strategy.empty()) cfg.strategy = strategy_from_string(o.strategy);
  if (!o.k.empty()) {
    if (o.k == "auto") {
      cfg.k_auto = true;
    } else if (all_digits(o.k)) {
      cfg.k = std::stoi(o.k);
      cfg.k_auto = false;
    } else {
      throw UsageError("--k expects an integer or 'auto', got '" + o.k + "'");
    }
  }
  if (o.seeds_n > 0) {
    cfg.seeds.clear();
    for (int i = 1; i <= o.seeds_n; ++i) cfg.seeds.push_back(static_cast<uint64_t>(i));
  }
  return cfg;
}

// ---- running seeds ----------------------------------------------------------

struct TrainOutcome {
  TrainConfig effective;  // k resolved when it was picked automatically
  int selected_k = -1;
  std::map<int, double> k_scores;  // mean best dev per candidate
  std::vector<SingleRun> runs;
};

TrainOutcome run_seeds(const Split& split, const LabelSet& labels, TrainConfig cfg) {
  TrainOutcome out;
  auto run_all = [&](const TrainConfig& c) {
    std::vector<SingleRun> runs;
    runs.reserve(c.seeds.size());
    for (uint64_t s : c.seeds) runs.push_back(run_training(split, labels, c, s));
    return runs;
  };
  if (cfg.strategy == FreezeStrategy::FreezeAfterK && cfg.k_auto) {
    std::map<int, std::vector<SingleRun>> runs_by_k;
    for (int k : {3, 4, 5}) {
      TrainConfig ck = cfg;
      ck.k = k;
      ck.k_auto = false;
      auto runs = run_all(ck);
      double mean = 0.0;
      for (const auto& r : runs) mean += r.result.best_dev;
      out.k_scores[k] = mean / static_cast<double>(runs.size());
      runs_by_k[k] = std::move(runs);
    }
    out.selected_k = select_k(out.k_scores);
    out.effective = cfg;
    out.effective.k = out.selected_k;
    out.effective.k_auto = false;
    out.runs = std::move(runs_by_k.at(out.selected_k));
  } else {
    cfg.validate();
    out.effective = cfg;
    out.runs = run_all(cfg);
  }
  return out;
}

void save_run_checkpoint(const SingleRun& run, const TrainConfig& cfg, const std::string& path) {
  switch (cfg.model_kind) {
    case ModelKind::Sec:
      save_sec_checkpoint(*run.sec, cfg, run.seed, path);
      return;
    case ModelKind::Multi:
      save_multi_checkpoint(*run.multi, cfg, run.seed, path);
      return;
    case ModelKind::Local:
      save_local_checkpoint(run.local, cfg, run.seed, path);
      return;
  }
  throw std::logic_error("unknown model kind");
}

// Writes per-seed checkpoint, records and curves under outdir/rel_base and
// returns the relative paths in write order.
std::vector<std::string> write_run_artifacts(const fs::path& outdir, const fs::path& rel_base,
                                             const TrainOutcome& outcome) {
  std::vector<std::string> rels;
  for (const auto& run : outcome.runs) {
    fs::path rel = rel_base / ("seed-" + std::to_string(run.seed));
    fs::create_directories(outdir / rel);
    fs::path ckpt = rel / "checkpoint.bin";
    save_run_checkpoint(run, outcome.effective, (outdir / ckpt).string());
    rels.push_back(ckpt.generic_string());
    fs::path records = rel / "records.json";
    write_file(outdir / records, records_to_json(run.result.records));
    rels.push_back(records.generic_string());
    fs::path curves = rel / "curves.csv";
    write_file(outdir / curves, curves_csv(run.result.records));
    rels.push_back(curves.generic_string());
  }
  return rels;
}

EvalReport average_dev(const TrainOutcome& outcome) {
  std::vector<EvalReport> reports;
  for (const auto& r : outcome.runs) reports.push_back(r.dev_report);
  return run_average(reports);
}

EvalReport average_test(const TrainOutcome& outcome) {
  std::vector<EvalReport> reports;
  for (const auto& r : outcome.runs) reports.push_back(r.test_report);
  return run_average(reports);
}

RunManifest base_manifest(const std::string& command, const TrainConfig& cfg,
                          const std::string& corpus_path) {
  RunManifest m;
  m.tool = std::string(kToolName) + " " + kToolVersion;
  m.command = command;
  m.config_json = cfg.to_json_string();
  m.corpus_path = corpus_path;
  m.corpus_checksum = file_checksum(corpus_path);
  m.seeds = cfg.seeds;
  return m;
}

// ---- subcommands ------------------------------------------------------------

int cmd_validate(const std::string& corpus_path, const std::string& labels_path,
                 std::ostream& out) {
  LabelSet labels = load_labels_or_default(labels_path);
  auto docs = load_corpus(corpus_path, labels);
  StatsReport stats = corpus_stats(docs);
  out << "ok: " << stats.documents << " documents, " << stats.tlinks << " tlinks\n";
  return 0;
}

int cmd_stats(const std::string& corpus_path, const std::string& labels_path, std::ostream& out) {
  LabelSet labels = load_labels_or_default(labels_path);
  auto docs = load_corpus(corpus_path, labels);
  StatsReport stats = corpus_stats(docs);
  char mean[32];
  std::snprintf(mean, sizeof(mean), "%.1f", stats.mean_chain_length_display());
  out << "documents: " << stats.documents << "\n";
  out << "tlinks: " << stats.tlinks << "\n";
  for (LinkCategory c : {LinkCategory::E2D, LinkCategory::E2T, LinkCategory::E2E,
                         LinkCategory::MAT})
    out << to_string(c) << ": " << stats.category_count(c) << "\n";
  out << "chains: " << stats.chains << "\n";
  out << "mean chain length: " << mean << "\n";
  return 0;
}

int cmd_chains(const std::string& corpus_path, const std::string& labels_path, bool invert,
               const std::string& out_path, std::ostream& out) {
  LabelSet labels = load_labels_or_default(labels_path);
  auto docs = load_corpus(corpus_path, labels);
  std::ostringstream lines;
  long count = 0;
  for (const auto& doc : docs) {
    for (const auto& chain : build_sect_chains(doc, invert, labels)) {
      lines << chain_to_json_line(chain) << "\n";
      ++count;
    }
  }
  if (out_path.empty()) {
    out << lines.str();
  } else {
    write_file(out_path, lines.str());
    out << "wrote " << count << " chains to " << out_path << "\n";
  }
  return 0;
}

int cmd_synth(const std::string& spec_path, const std::string& out_path, std::ostream& out) {
  SynthSpec spec = SynthSpec::from_json_file(spec_path);
  auto docs = generate_synthetic_corpus(spec);
  save_corpus(docs, out_path);
  out << "wrote " << docs.size() << " documents to " << out_path << "\n";
  return 0;
}

int cmd_train(const TrainCliOpts& opts, const TrainConfig& file_cfg, std::ostream& out) {
  TrainConfig requested = finalize_train_config(file_cfg, opts);
  LabelSet labels = load_labels_or_default(opts.labels_path);
  auto docs = load_corpus(opts.corpus, labels);
  Split split = make_split(docs, opts.split);

  fs::path outdir(opts.outdir);
  fs::create_directories(outdir);

  TrainOutcome outcome = run_seeds(split, labels, requested);

  std::vector<std::string> outputs;
  write_file(outdir / "split.json", split_to_json(split));
  outputs.push_back("split.json");
  auto run_rels = write_run_artifacts(outdir, fs::path(), outcome);
  outputs.insert(outputs.end(), run_rels.begin(), run_rels.end());

  EvalReport dev = average_dev(outcome);
  write_file(outdir / "dev_report.json", eval_report_to_json(dev) + "\n");
  outputs.push_back("dev_report.json");

  bool have_test = !split.test.empty();
  EvalReport test;
  if (have_test) {
    test = average_test(outcome);
    write_file(outdir / "test_report.json", eval_report_to_json(test) + "\n");
    outputs.push_back("test_report.json");
  }

  RunManifest manifest = base_manifest("train", requested, opts.corpus);
  manifest.outputs = outputs;
  manifest.selected_k = outcome.selected_k;
  manifest.save((outdir / "manifest.json").string());

  out << "model: " << to_string(outcome.effective.model_kind) << "\n";
  out << "documents: " << split.train.size() << " train, " << split.dev.size() << " dev, "
      << split.test.size() << " test\n";
  for (const auto& [k, score] : outcome.k_scores)
    out << "k=" << k << " mean best dev: " << fmt4(score) << "\n";
  if (outcome.selected_k >= 0) out << "selected k: " << outcome.selected_k << "\n";
  out << "dev micro-F1 mean: " << fmt4(dev.overall) << " (stddev " << fmt4(dev.overall_stddev)
      << ")\n";
  if (have_test)
    out << "test micro-F1 mean: " << fmt4(test.overall) << " (stddev "
        << fmt4(test.overall_stddev) << ")\n";
  out << "wrote " << (outdir / "manifest.json").generic_string() << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& corpus_path,
             const SplitOpts& split_opts, const std::string& on, bool as_json,
             std::ostream& out) {
  LoadedModel model = load_model(ckpt_path);
  auto docs = load_corpus(corpus_path, model.labels);

  std::vector<Document> subset;
  if (on == "all") {
    subset = docs;
  } else {
    Split split = make_split(docs, split_opts);
    if (on == "train")
      subset = split.train;
    else if (on == "dev")
      subset = split.dev;
    else
      subset = split.test;
    if (subset.empty())
      throw std::invalid_argument("the '" + on + "' subset of this split is empty");
  }

  EvalReport report;
  switch (model.kind) {
    case ModelKind::Sec:
      report = evaluate_chain_model(*model.sec, subset, model.config.invert_links);
      break;
    case ModelKind::Multi:
      report = evaluate_pair_model(*model.multi, subset);
      break;
    case ModelKind::Local:
      report = evaluate_local_models(model.local, subset);
      break;
  }
  report.model_kind = to_string(model.kind);
  report.seeds = {model.seed};

  if (as_json)
    out << eval_report_to_json(report) << "\n";
  else
    out << eval_report_to_text(report);
  return 0;
}

int cmd_ablate(const TrainCliOpts& opts, const TrainConfig& file_cfg, std::ostream& out) {
  TrainConfig base = finalize_train_config(file_cfg, opts);
  LabelSet labels = load_labels_or_default(opts.labels_path);
  auto docs = load_corpus(opts.corpus, labels);
  Split split = make_split(docs, opts.split);

  fs::path outdir(opts.outdir);
  fs::create_directories(outdir);

  std::map<ModelKind, TrainOutcome> outcomes;
  for (ModelKind kind : {ModelKind::Local, ModelKind::Multi, ModelKind::Sec}) {
    TrainConfig cfg = base;
    cfg.model_kind = kind;
    outcomes.emplace(kind, run_seeds(split, labels, cfg));
  }

  bool on_test = !split.test.empty();
  auto averaged = [&](ModelKind kind) {
    const TrainOutcome& o = outcomes.at(kind);
    return on_test ? average_test(o) : average_dev(o);
  };
  EvalReport local = averaged(ModelKind::Local);
  EvalReport multi = averaged(ModelKind::Multi);
  EvalReport sec = averaged(ModelKind::Sec);
  AblationReport report = ablation_report(local, multi, sec);
  EvalReport majority =
      majority_vote(split.train, on_test ? split.test : split.dev, labels);
  majority.model_kind = "majority";

  std::vector<std::string> outputs;
  write_file(outdir / "split.json", split_to_json(split));
  outputs.push_back("split.json");
  for (ModelKind kind : {ModelKind::Local, ModelKind::Multi, ModelKind::Sec}) {
    auto rels = write_run_artifacts(outdir, fs::path(to_string(kind)), outcomes.at(kind));
    outputs.insert(outputs.end(), rels.begin(), rels.end());
  }

  std::ostringstream text;
  text << "evaluated on: " << (on_test ? "test" : "dev") << "\n\n";
  text << eval_report_to_text(majority) << "\n";
  text << report.to_text();
  write_file(outdir / "report.txt", text.str());
  outputs.push_back("report.txt");

  json jr;
  jr["evaluated_on"] = on_test ? "test" : "dev";
  jr["majority"] = json::parse(eval_report_to_json(majority));
  jr["ablation"] = json::parse(report.to_json());
  json jk;
  for (const auto& [kind, outcome] : outcomes)
    if (outcome.selected_k >= 0) jk[to_string(kind)] = outcome.selected_k;
  if (!jk.empty()) jr["selected_k"] = jk;
  write_file(outdir / "report.json", jr.dump(2) + "\n");
  outputs.push_back("report.json");

  RunManifest manifest = base_manifest("ablate", base, opts.corpus);
  manifest.outputs = outputs;
  manifest.save((outdir / "manifest.json").string());

  out << text.str();
  out << "wrote " << (outdir / "manifest.json").generic_string() << "\n";
  return 0;
}

int cmd_curves(const std::string& dir, const std::string& out_path, std::ostream& out) {
  std::vector<fs::path> files;
  if (!fs::is_directory(dir)) throw std::invalid_argument("not a directory: " + dir);
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().filename() == "records.json")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::invalid_argument("no records.json found under " + dir);

  std::vector<std::vector<TrainRecord>> all;
  all.reserve(files.size());
  for (const auto& f : files) all.push_back(records_from_json_string(read_file(f.string())));

  std::map<std::pair<std::string, int>, std::vector<const TrainRecord*>> groups;
  for (const auto& records : all)
    for (const auto& rec : records) groups[{rec.strategy, rec.epoch}].push_back(&rec);

  std::vector<TrainRecord> averaged;
  for (const auto& [key, recs] : groups) {
    TrainRecord avg;
    avg.strategy = key.first;
    avg.epoch = key.second;
    avg.encoder_frozen = recs.front()->encoder_frozen;
    for (const TrainRecord* r : recs) {
      if (r->encoder_frozen != avg.encoder_frozen)
        throw std::invalid_argument("inconsistent freeze state for strategy " + key.first +
                                    " epoch " + std::to_string(key.second));
      if (r != recs.front()) {
        auto same_keys = [](const auto& a, const auto& b) {
          if (a.size() != b.size()) return false;
          auto it = b.begin();
          for (const auto& [k, v] : a) {
            (void)v;
            if (it->first != k) return false;
            ++it;
          }
          return true;
        };
        if (!same_keys(r->dev_micro_f1, recs.front()->dev_micro_f1))
          throw std::invalid_argument("records disagree on categories for strategy " +
                                      key.first + " epoch " + std::to_string(key.second));
      }
    }
    double n = static_cast<double>(recs.size());
    for (const TrainRecord* r : recs) {
      avg.dev_micro_f1_overall += r->dev_micro_f1_overall / n;
      for (const auto& [cat, v] : r->dev_micro_f1) avg.dev_micro_f1[cat] += v / n;
    }
    averaged.push_back(std::move(avg));
  }

  std::string csv = curves_csv(averaged);
  write_file(out_path, csv);
  std::set<std::string> strategies;
  for (const auto& r : averaged) strategies.insert(r.strategy);
  out << "wrote " << out_path << " (" << strategies.size() << " strategies, " << averaged.size()
      << " rows, from " << files.size() << " record files)\n";
  return 0;
}

std::string prescan_config_path(const std::vector<std::string>& args) {
  for (size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) return args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) return args[i].substr(9);
  }
  return {};
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"temporal relation chain classifier"};
  app.name(kToolName);
  app.require_subcommand(1);

  std::string config_path = prescan_config_path(args);
  TrainConfig file_cfg;
  try {
    if (!config_path.empty()) file_cfg = TrainConfig::from_json_file(config_path);
  } catch (const json::exception& e) {
    err << "error:validation: bad config file " << config_path << ": " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "error:validation: bad config file " << config_path << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error:runtime: " << e.what() << "\n";
    return 3;
  }

  std::string validate_corpus, validate_labels;
  auto* validate_cmd = app.add_subcommand("validate", "check a corpus file and report its size");
  validate_cmd->add_option("corpus", validate_corpus, "corpus JSONL file")->required();
  validate_cmd->add_option("--labels", validate_labels, "label set JSON file");

  std::string stats_corpus, stats_labels;
  auto* stats_cmd = app.add_subcommand("stats", "per-category link and chain tallies");
  stats_cmd->add_option("corpus", stats_corpus, "corpus JSONL file")->required();
  stats_cmd->add_option("--labels", stats_labels, "label set JSON file");

  std::string chains_corpus, chains_labels, chains_out;
  bool chains_invert = false;
  auto* chains_cmd = app.add_subcommand("chains", "emit source-event chains as JSONL");
  chains_cmd->add_option("corpus", chains_corpus, "corpus JSONL file")->required();
  chains_cmd->add_option("--labels", chains_labels, "label set JSON file");
  chains_cmd->add_flag("--invert", chains_invert, "add inverted event-target links first");
  chains_cmd->add_option("-o,--out", chains_out, "write here instead of stdout");

  std::string synth_spec, synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "generate a corpus with a planted labeling rule");
  synth_cmd->add_option("spec", synth_spec, "generator spec JSON file")->required();
  synth_cmd->add_option("-o,--out", synth_out, "output corpus JSONL file")->required();

  TrainCliOpts train_opts;
  TrainConfig train_cfg = file_cfg;
  auto* train_cmd = app.add_subcommand("train", "train a model, saving checkpoints and curves");
  add_train_options(train_cmd, train_opts, train_cfg, /*with_model=*/true);

  std::string eval_ckpt, eval_corpus, eval_on = "test";
  bool eval_json = false;
  SplitOpts eval_split;
  auto* eval_cmd = app.add_subcommand("eval", "score a saved checkpoint on a corpus subset");
  eval_cmd->add_option("checkpoint", eval_ckpt, "checkpoint file")->required();
  eval_cmd->add_option("corpus", eval_corpus, "corpus JSONL file")->required();
  eval_cmd->add_option("--on", eval_on, "subset to score")
      ->check(CLI::IsMember({"train", "dev", "test", "all"}));
  eval_cmd->add_flag("--json", eval_json, "emit the report as JSON");
  add_split_options(eval_cmd, eval_split);

  TrainCliOpts ablate_opts;
  TrainConfig ablate_cfg = file_cfg;
  auto* ablate_cmd =
      app.add_subcommand("ablate", "train pair-local, shared-encoder and chain models and compare");
  add_train_options(ablate_cmd, ablate_opts, ablate_cfg, /*with_model=*/false);

  std::string curves_dir, curves_out;
  auto* curves_cmd =
      app.add_subcommand("curves", "average per-seed training records into one curve CSV");
  curves_cmd->add_option("dir", curves_dir, "directory searched recursively for records.json")
      ->required();
  curves_cmd->add_option("-o,--out", curves_out, "output CSV file")->required();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error:usage: " << e.what() << "\n";
    return 1;
  }

  try {
    if (validate_cmd->parsed()) return cmd_validate(validate_corpus, validate_labels, out);
    if (stats_cmd->parsed()) return cmd_stats(stats_corpus, stats_labels, out);
    if (chains_cmd->parsed())
      return cmd_chains(chains_corpus, chains_labels, chains_invert, chains_out, out);
    if (synth_cmd->parsed()) return cmd_synth(synth_spec, synth_out, out);
    if (train_cmd->parsed()) return cmd_train(train_opts, train_cfg, out);
    if (eval_cmd->parsed())
      return cmd_eval(eval_ckpt, eval_corpus, eval_split, eval_on, eval_json, out);
    if (ablate_cmd->parsed()) return cmd_ablate(ablate_opts, ablate_cfg, out);
    if (curves_cmd->parsed()) return cmd_curves(curves_dir, curves_out, out);
    err << "error:usage: no subcommand given\n";
    return 1;
  } catch (const UsageError& e) {
    err << "error:usage: " << e.what() << "\n";
    return 1;
  } catch (const ParseError& e) {
    err << "error:validation: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    err << "error:validation: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "error:validation: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    err << "error:validation: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error:runtime: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace sectrc::cli
