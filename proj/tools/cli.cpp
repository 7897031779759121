#include "cli.hpp"

#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "dmmvh/checkpoint.hpp"
#include "dmmvh/data.hpp"
#include "dmmvh/error.hpp"
#include "dmmvh/gradcheck.hpp"
#include "dmmvh/retrieval.hpp"
#include "dmmvh/trainer.hpp"

namespace dmmvh::cli {

namespace fs = std::filesystem;

namespace {

struct SynthArgs {
  SynthConfig cfg;
  std::string out_dir;
};

struct TrainArgs {
  TrainConfig cfg;
  std::string data;
  std::string out_dir;
  std::string ablation = "full";
  std::string schedule = "constant";
  std::string similarity = "binary";
  std::string resume;
  std::string config_file;
  bool wall_clock = false;
  bool quiet = false;
};

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string out_dir;
  std::vector<std::size_t> cutoffs = {10, 50, 100, 200, 500};
};

struct SearchArgs {
  std::string checkpoint;
  std::string index;
  std::string queries;
  std::string query_split = "query";
  std::size_t k = 10;
};

struct GradcheckArgs {
  std::uint64_t seed = 7;
  std::size_t instances = 20;
  double step = 1e-5;
};

HammingIndex build_index(const std::vector<FeatureRecord>& records, const Checkpoint& ckpt) {
  const Matrix codes = encode(records, ckpt.params, ckpt.model);
  HammingIndex index;
  for (std::size_t i = 0; i < records.size(); ++i) {
    index.add(binarize(codes.row(i)), records[i].id, records[i].label);
  }
  return index;
}

void check_views(const DatasetSplit& data, const ModelConfig& model) {
  if (data.view_dims != model.view_dims) {
    throw ConfigError("dataset view dimensions do not match the checkpoint");
  }
}

EvalReport run_evaluation(const DatasetSplit& data, const Checkpoint& ckpt,
                          const std::vector<std::size_t>& cutoffs) {
  check_views(data, ckpt.model);
  if (data.query.empty() || data.retrieval.empty()) {
    throw ConfigError("evaluation needs query and retrieval splits");
  }
  EvalReport report =
      evaluate(build_index(data.query, ckpt), build_index(data.retrieval, ckpt), cutoffs);
  report.config = ckpt.config;
  report.config.emplace_back("checkpoint-epoch", std::to_string(ckpt.epoch));
  return report;
}

// Fills options not given on the command line from an INI/TOML style file. CLI11 only
// reads config files for the top-level app, so subcommand files are applied here.
void apply_config_file(CLI::App& sub, const std::string& path) {
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_file(path);
  } catch (const CLI::FileError& e) {
    throw IoError(e.what());
  }
  for (const CLI::ConfigItem& item : items) {
    if (item.name == "++" || item.name == "--") continue;
    if (!item.parents.empty() && item.parents != std::vector<std::string>{sub.get_name()}) {
      throw ConfigError(path + ": unexpected section '" + item.parents.front() + "'");
    }
    CLI::Option* opt = sub.get_option_no_throw("--" + item.name);
    if (opt == nullptr || item.name == "config") {
      throw ConfigError(path + ": unknown key '" + item.name + "'");
    }
    if (opt->count() > 0) continue;  // command line wins
    if (opt->get_type_size() == 0) {
      // flags: accept true/false style values
      const std::string v = item.inputs.empty() ? "true" : item.inputs.front();
      if (v != "true" && v != "1" && v != "false" && v != "0") {
        throw ConfigError(path + ": flag '" + item.name + "' expects true or false");
      }
      if (v == "false" || v == "0") continue;
      opt->add_result(std::string("true"));
    } else {
      for (const std::string& in : item.inputs) opt->add_result(in);
    }
    try {
      opt->run_callback();
    } catch (const CLI::ParseError& e) {
      throw ConfigError(path + ": bad value for '" + item.name + "': " + e.what());
    }
  }
}

int do_synth(const SynthArgs& a, std::ostream& out) {
  const DatasetSplit split = generate_synthetic(a.cfg);
  const fs::path manifest = write_features(split, a.out_dir);
  out << "wrote " << manifest.string() << " (" << split.train.size() << " train, "
      << split.retrieval.size() << " retrieval, " << split.query.size() << " query)\n";
  return 0;
}

int do_train(TrainArgs a, std::ostream& out) {
  a.cfg.ablation = parse_ablation(a.ablation);
  a.cfg.schedule = parse_lr_schedule(a.schedule);
  if (a.similarity == "binary") {
    a.cfg.loss.similarity = SimilarityMode::kBinary;
  } else if (a.similarity == "raw") {
    a.cfg.loss.similarity = SimilarityMode::kRawProduct;
  } else {
    throw ConfigError("unknown similarity mode '" + a.similarity + "'");
  }
  validate(a.cfg);
  const DatasetSplit data = load_features(a.data);
  fs::create_directories(a.out_dir);
  const fs::path dir = a.out_dir;

  std::optional<TrainState> resume;
  if (!a.resume.empty()) {
    Checkpoint c = load_checkpoint(a.resume);
    if (!c.optim) throw ConfigError("resume checkpoint carries no optimizer state");
    if (c.model != model_config_for(a.cfg, data.view_dims)) {
      throw ConfigError("resume checkpoint does not match the model configuration");
    }
    resume = TrainState{std::move(c.params), std::move(*c.optim), c.epoch};
  }

  const auto entries = config_entries(a.cfg);
  TrainResult result = train(data, a.cfg, std::move(resume), [&](const EpochRecord& r) {
    if (a.quiet) return;
    out << "epoch " << r.epoch << " loss " << std::setprecision(6) << r.loss;
    if (r.map) out << " mAP " << *r.map;
    out << "\n";
  });

  Checkpoint final_ckpt{result.model, result.final_state.params, result.final_state.optim,
                        a.cfg.seed, result.final_state.epoch, entries};
  save_checkpoint(final_ckpt, dir / "final.ckpt");
  Checkpoint best_ckpt{result.model, result.best_params, std::nullopt, a.cfg.seed,
                       result.best_epoch, entries};
  save_checkpoint(best_ckpt, dir / "best.ckpt");
  if (!result.records.empty()) {
    export_curves(result.records, dir / "curves.csv", entries, a.wall_clock);
  }
  if (!data.query.empty() && !data.retrieval.empty()) {
    const EvalReport report = run_evaluation(data, final_ckpt, a.cfg.cutoffs);
    write_report_csv(report, dir / "report.csv");
    write_report_summary(report, dir / "report.txt");
    out << "final mAP " << std::setprecision(6) << report.map << "\n";
  }
  out << "wrote " << (dir / "final.ckpt").string() << "\n";
  return 0;
}

int do_eval(const EvalArgs& a, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const DatasetSplit data = load_features(a.data);
  const EvalReport report = run_evaluation(data, ckpt, a.cutoffs);
  if (!a.out_dir.empty()) {
    fs::create_directories(a.out_dir);
    write_report_csv(report, fs::path(a.out_dir) / "report.csv");
    write_report_summary(report, fs::path(a.out_dir) / "report.txt");
  }
  out << std::fixed << std::setprecision(6) << "mAP " << report.map << "\n";
  for (std::size_t c = 0; c < report.cutoffs.size(); ++c) {
    out << "mAP@" << report.cutoffs[c] << " " << report.map_at_k[c] << " Recall@"
        << report.cutoffs[c] << " " << report.recall_at_k[c] << "\n";
  }
  return 0;
}

int do_search(const SearchArgs& a, std::ostream& out) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const DatasetSplit corpus = load_features(a.index);
  const DatasetSplit query_data = load_features(a.queries);
  check_views(corpus, ckpt.model);
  check_views(query_data, ckpt.model);
  const std::vector<FeatureRecord>* queries = nullptr;
  if (a.query_split == "query") {
    queries = &query_data.query;
  } else if (a.query_split == "retrieval") {
    queries = &query_data.retrieval;
  } else if (a.query_split == "train") {
    queries = &query_data.train;
  } else {
    throw ConfigError("unknown split '" + a.query_split + "'");
  }
  if (queries->empty()) throw ConfigError("query split '" + a.query_split + "' is empty");
  const HammingIndex index = build_index(corpus.retrieval, ckpt);
  const Matrix codes = encode(*queries, ckpt.params, ckpt.model);
  for (std::size_t i = 0; i < queries->size(); ++i) {
    const auto ids = search(index, binarize(codes.row(i)), a.k);
    out << (*queries)[i].id << '\t';
    for (std::size_t j = 0; j < ids.size(); ++j) out << (j ? "," : "") << ids[j];
    out << '\n';
  }
  return 0;
}

int do_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  const GradcheckResult r = run_gradcheck(a.seed, a.instances, a.step);
  out << "instances " << r.instances << " parameters " << r.parameters_checked << "\n";
  out << "max relative error " << std::scientific << std::setprecision(3) << r.max_rel_error
      << " (" << r.worst_tensor << ")\n";
  if (r.max_rel_error >= 1e-4) {
    out << "FAILED: exceeds 1e-4\n";
    return 1;
  }
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Deep metric multi-view hashing: synthesize data, train, evaluate, search"};
  app.require_subcommand(1, 1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Write a synthetic multi-view dataset");
  s->add_option("--out", synth.out_dir, "Output directory")->required();
  s->add_option("--categories", synth.cfg.categories, "Number of categories")
      ->capture_default_str();
  s->add_option("--views", synth.cfg.views, "Number of views")->capture_default_str();
  s->add_option("--dims", synth.cfg.view_dims, "Feature dimension per view (comma separated)")
      ->delimiter(',')
      ->capture_default_str();
  s->add_option("--train", synth.cfg.train_size, "Training samples")->capture_default_str();
  s->add_option("--retrieval", synth.cfg.retrieval_size, "Retrieval samples")
      ->capture_default_str();
  s->add_option("--query", synth.cfg.query_size, "Query samples")->capture_default_str();
  s->add_option("--sigma", synth.cfg.sigma, "Per-component noise std around anchors")
      ->capture_default_str();
  s->add_option("--multi-label-prob", synth.cfg.multi_label_prob,
                "Probability of a second category per sample")
      ->capture_default_str();
  s->add_flag("--complementary-views", synth.cfg.complementary_views,
              "Each view resolves only part of the category identity");
  s->add_option("--common-offset", synth.cfg.common_offset,
                "Norm of a shared offset added to every sample of a view")
      ->capture_default_str();
  s->add_option("--seed", synth.cfg.seed, "Random seed")->capture_default_str();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a hashing model");
  t->add_option("--config", tr.config_file,
                "Config file of 'key = value' lines (optionally under [train]); flags override it");
  t->add_option("--data", tr.data, "Dataset manifest")->required();
  t->add_option("--out", tr.out_dir, "Output directory for checkpoints and CSVs")->required();
  t->add_option("--bits", tr.cfg.bits, "Hash code length K")->capture_default_str();
  t->add_option("--epochs", tr.cfg.epochs, "Training epochs")->capture_default_str();
  t->add_option("--batch-size", tr.cfg.batch_size, "Batch size b")->capture_default_str();
  t->add_option("--proj-dim", tr.cfg.proj_dim, "Per-view projection dimension")
      ->capture_default_str();
  t->add_option("--lr", tr.cfg.adam.lr, "AdamW learning rate")
      ->capture_default_str();
  t->add_option("--beta1", tr.cfg.adam.beta1, "AdamW beta1")->capture_default_str();
  t->add_option("--beta2", tr.cfg.adam.beta2, "AdamW beta2")
      ->capture_default_str();
  t->add_option("--eps", tr.cfg.adam.eps, "AdamW epsilon")->capture_default_str();
  t->add_option("--weight-decay", tr.cfg.adam.weight_decay, "Decoupled weight decay")
      ->capture_default_str();
  t->add_option("--lr-schedule", tr.schedule, "constant | cosine")->capture_default_str();
  t->add_option("--dropout", tr.cfg.dropout_p, "Dropout on the concatenated views")
      ->capture_default_str();
  t->add_option("--lambda", tr.cfg.loss.lambda, "Pair-block fraction lambda")
      ->capture_default_str();
  t->add_option("--mu", tr.cfg.loss.mu, "Quantization loss weight mu")
      ->capture_default_str();
  t->add_option("--w-d", tr.cfg.loss.w_d, "Dissimilar-pair loss weight w_d")
      ->capture_default_str();
  t->add_option("--similarity", tr.similarity,
                "binary (label overlap) | raw (label dot product, experimental)")
      ->capture_default_str();
  t->add_option("--seed", tr.cfg.seed, "Random seed")->capture_default_str();
  t->add_option("--eval-every", tr.cfg.eval_every, "Evaluate test mAP every N epochs (0: final only)")
      ->capture_default_str();
  t->add_option("--cutoffs", tr.cfg.cutoffs, "mAP@K / Recall@K cutoffs")
      ->delimiter(',')
      ->capture_default_str();
  t->add_option("--ablation", tr.ablation,
                "full | metric-only | quant-only | image-only | text-only | concat-only")
      ->capture_default_str();
  t->add_option("--resume", tr.resume, "Continue from a final.ckpt with optimizer state");
  t->add_flag("--wall-clock", tr.wall_clock, "Record epoch wall time in curves.csv");
  t->add_flag("--quiet", tr.quiet, "Suppress per-epoch progress");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset's query/retrieval splits");
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  e->add_option("--data", ev.data, "Dataset manifest")->required();
  e->add_option("--out", ev.out_dir, "Directory for report.csv and report.txt");
  e->add_option("--cutoffs", ev.cutoffs, "mAP@K / Recall@K cutoffs")
      ->delimiter(',')
      ->capture_default_str();

  SearchArgs se;
  auto* q = app.add_subcommand("search", "Rank an index for every query record");
  q->add_option("--checkpoint", se.checkpoint, "Checkpoint file")->required();
  q->add_option("--index", se.index, "Manifest whose retrieval split is indexed")->required();
  q->add_option("--queries", se.queries, "Manifest holding the query records")->required();
  q->add_option("--query-split", se.query_split, "Split of --queries to use")
      ->capture_default_str();
  q->add_option("--k", se.k, "Results per query")->capture_default_str()->check(
      CLI::PositiveNumber);

  GradcheckArgs gc;
  auto* g = app.add_subcommand("gradcheck", "Finite-difference check of the analytic gradients");
  g->add_option("--seed", gc.seed, "Random seed")->capture_default_str();
  g->add_option("--instances", gc.instances, "Random configurations")->capture_default_str();
  g->add_option("--step", gc.step, "Central difference step")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex, out, err);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex, out, err);
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << "\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return 2;
  }

  try {
    if (*s) return do_synth(synth, out);
    if (*t) {
      if (!tr.config_file.empty()) apply_config_file(*t, tr.config_file);
      return do_train(tr, out);
    }
    if (*e) return do_eval(ev, out);
    if (*q) return do_search(se, out);
    if (*g) return do_gradcheck(gc, out);
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace dmmvh::cli
