#include "dmmvh/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "dmmvh/error.hpp"
#include "dmmvh/retrieval.hpp"

namespace dmmvh {

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::kFull: return "full";
    case Ablation::kMetricOnly: return "metric-only";
    case Ablation::kQuantOnly: return "quant-only";
    case Ablation::kImageOnly: return "image-only";
    case Ablation::kTextOnly: return "text-only";
    case Ablation::kConcatOnly: return "concat-only";
  }
  return "full";
}

Ablation parse_ablation(const std::string& s) {
  for (Ablation a : {Ablation::kFull, Ablation::kMetricOnly, Ablation::kQuantOnly,
                     Ablation::kImageOnly, Ablation::kTextOnly, Ablation::kConcatOnly}) {
    if (to_string(a) == s) return a;
  }
  throw ConfigError("unknown ablation mode '" + s + "'");
}

std::string to_string(LrSchedule s) { return s == LrSchedule::kCosine ? "cosine" : "constant"; }

LrSchedule parse_lr_schedule(const std::string& s) {
  if (s == "constant") return LrSchedule::kConstant;
  if (s == "cosine") return LrSchedule::kCosine;
  throw ConfigError("unknown lr schedule '" + s + "'");
}

void validate(const TrainConfig& cfg) {
  if (cfg.bits < 1) throw ConfigError("bits must be >= 1");
  if (cfg.proj_dim < 1) throw ConfigError("projection dimension must be >= 1");
  if (cfg.batch_size < 2) throw ConfigError("batch size must be >= 2");
  if (!(cfg.dropout_p >= 0.0 && cfg.dropout_p < 1.0)) throw ConfigError("dropout must be in [0, 1)");
  validate(cfg.adam);
  validate(cfg.loss);
  block_size(cfg.loss, cfg.batch_size);
  for (std::size_t k : cfg.cutoffs) {
    if (k < 1) throw ConfigError("cutoffs must be >= 1");
  }
}

std::vector<std::pair<std::string, std::string>> config_entries(const TrainConfig& cfg) {
  auto num = [](double x) {
    std::ostringstream s;
    s.precision(17);
    s << x;
    return s.str();
  };
  std::string cutoffs;
  for (std::size_t i = 0; i < cfg.cutoffs.size(); ++i) {
    cutoffs += (i ? "," : "") + std::to_string(cfg.cutoffs[i]);
  }
  return {
      {"bits", std::to_string(cfg.bits)},
      {"epochs", std::to_string(cfg.epochs)},
      {"batch-size", std::to_string(cfg.batch_size)},
      {"proj-dim", std::to_string(cfg.proj_dim)},
      {"lr", num(cfg.adam.lr)},
      {"beta1", num(cfg.adam.beta1)},
      {"beta2", num(cfg.adam.beta2)},
      {"eps", num(cfg.adam.eps)},
      {"weight-decay", num(cfg.adam.weight_decay)},
      {"lr-schedule", to_string(cfg.schedule)},
      {"dropout", num(cfg.dropout_p)},
      {"lambda", num(cfg.loss.lambda)},
      {"mu", num(cfg.loss.mu)},
      {"w-d", num(cfg.loss.w_d)},
      {"similarity", cfg.loss.similarity == SimilarityMode::kBinary ? "binary" : "raw"},
      {"seed", std::to_string(cfg.seed)},
      {"eval-every", std::to_string(cfg.eval_every)},
      {"cutoffs", cutoffs},
      {"ablation", to_string(cfg.ablation)},
  };
}

ModelConfig model_config_for(const TrainConfig& cfg, const std::vector<std::size_t>& view_dims) {
  ModelConfig m;
  m.view_dims = view_dims;
  m.proj_dim = cfg.proj_dim;
  m.bits = cfg.bits;
  if (cfg.ablation == Ablation::kConcatOnly) m.fusion = FusionMode::kConcat;
  if (cfg.ablation == Ablation::kImageOnly || cfg.ablation == Ablation::kTextOnly) {
    if (view_dims.size() < 2) {
      throw ConfigError(to_string(cfg.ablation) + " needs a dataset with at least two views");
    }
    m.active_views.assign(view_dims.size(), false);
    m.active_views[cfg.ablation == Ablation::kImageOnly ? 0 : 1] = true;
  }
  validate(m);
  return m;
}

LossConfig loss_config_for(const TrainConfig& cfg) {
  LossConfig l = cfg.loss;
  if (cfg.ablation == Ablation::kMetricOnly) l.mu = 0.0;
  if (cfg.ablation == Ablation::kQuantOnly) l.metric_weight = 0.0;
  return l;
}

TrainState initial_state(const TrainConfig& cfg, const std::vector<std::size_t>& view_dims) {
  const ModelConfig model = model_config_for(cfg, view_dims);
  TrainState s;
  s.params = init_params(model, cfg.seed);
  s.optim = make_optim_state(s.params, cfg.adam);
  return s;
}

CodeEvaluation evaluate_codes(const DatasetSplit& data, const ModelParams& params,
                              const ModelConfig& model) {
  const Matrix q = encode(data.query, params, model);
  const Matrix r = encode(data.retrieval, params, model);
  HammingIndex queries;
  HammingIndex corpus;
  for (std::size_t i = 0; i < data.query.size(); ++i) {
    queries.add(binarize(q.row(i)), data.query[i].id, data.query[i].label);
  }
  for (std::size_t i = 0; i < data.retrieval.size(); ++i) {
    corpus.add(binarize(r.row(i)), data.retrieval[i].id, data.retrieval[i].label);
  }
  CodeEvaluation out;
  out.map = evaluate(queries, corpus, {}).map;
  double gap = 0.0;
  for (double h : q.span()) gap += std::abs(std::abs(h) - 1.0);
  out.code_gap = gap / static_cast<double>(q.size());
  return out;
}

TrainResult train(const DatasetSplit& data, const TrainConfig& cfg,
                  std::optional<TrainState> resume, const EpochCallback& on_epoch) {
  validate(cfg);
  if (data.train.empty()) throw ConfigError("training split is empty");
  validate_records(data.train, data.view_dims, data.categories, "train");
  if (cfg.epochs > 0 && cfg.batch_size > data.train.size()) {
    throw ConfigError("batch size " + std::to_string(cfg.batch_size) + " exceeds training size " +
                      std::to_string(data.train.size()));
  }

  TrainResult result;
  result.model = model_config_for(cfg, data.view_dims);
  const LossConfig loss_cfg = loss_config_for(cfg);
  TrainState state = resume ? std::move(*resume) : initial_state(cfg, data.view_dims);
  validate(state.params, result.model);
  if (!same_shape(state.params, state.optim.m)) {
    throw ShapeError("resume state: optimizer moments do not match the parameters");
  }
  result.best_params = state.params;
  const bool can_eval = !data.query.empty() && !data.retrieval.empty();

  for (std::size_t epoch = state.epoch + 1; epoch <= cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const auto epoch_batches = batches(data.train, cfg.batch_size, cfg.seed, epoch);
    double lr = cfg.adam.lr;
    if (cfg.schedule == LrSchedule::kCosine) {
      const double progress = static_cast<double>(epoch - 1) / static_cast<double>(cfg.epochs);
      lr = 0.5 * cfg.adam.lr * (1.0 + std::cos(std::numbers::pi * progress));
    }

    double loss_sum = 0.0;
    for (std::size_t bi = 0; bi < epoch_batches.size(); ++bi) {
      const Batch& batch = epoch_batches[bi];
      const std::uint64_t dropout_seed = mix_seed(mix_seed(cfg.seed, epoch), bi + 1);
      ForwardResult fr = forward_batch(batch, state.params, result.model, cfg.dropout_p, true,
                                       dropout_seed);
      TotalLoss tl;
      try {
        tl = total_loss(fr.codes, label_matrix(batch), loss_cfg);
      } catch (const NumericError&) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(bi));
      }
      const Gradients g = backward_batch(fr.tape, state.params, result.model, tl.grad);
      adamw_step(state.params, g, state.optim, lr);
      loss_sum += tl.loss;
    }
    state.epoch = epoch;

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = loss_sum / static_cast<double>(epoch_batches.size());
    if (!std::isfinite(rec.loss)) {
      throw NumericError("non-finite mean loss at epoch " + std::to_string(epoch));
    }
    const bool periodic = cfg.eval_every > 0 && epoch % cfg.eval_every == 0;
    if (can_eval && (periodic || epoch == cfg.epochs)) {
      const CodeEvaluation ev = evaluate_codes(data, state.params, result.model);
      rec.map = ev.map;
      rec.code_gap = ev.code_gap;
      if (!result.best_map || ev.map > *result.best_map) {
        result.best_map = ev.map;
        result.best_epoch = epoch;
        result.best_params = state.params;
      }
    }
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                            started).count();
    if (on_epoch) on_epoch(rec);
    result.records.push_back(rec);
  }
  if (!result.best_map) {
    result.best_params = state.params;
    result.best_epoch = state.epoch;
  }
  result.final_state = std::move(state);
  return result;
}

void export_curves(const std::vector<EpochRecord>& records, const std::filesystem::path& path,
                   const std::vector<std::pair<std::string, std::string>>& config,
                   bool include_wall_time) {
  if (records.empty()) throw ArgumentError("export_curves: no epoch records");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& [k, v] : config) out << "# " << k << "=" << v << "\n";
  out.precision(17);
  out << "epoch,loss,map,wall_ms\n";
  for (const EpochRecord& r : records) {
    out << r.epoch << "," << r.loss << ",";
    if (r.map) out << *r.map;
    out << "," << (include_wall_time ? r.wall_ms : 0.0) << "\n";
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<EpochRecord> read_curves(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<EpochRecord> out;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "epoch,loss,map,wall_ms") throw IoError(path.string() + ": unexpected header");
      header_seen = true;
      continue;
    }
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
    if (cols.size() == 3) cols.emplace_back();
    if (cols.size() != 4) throw IoError(path.string() + ": malformed row '" + line + "'");
    try {
      EpochRecord r;
      r.epoch = std::stoull(cols[0]);
      r.loss = std::stod(cols[1]);
      if (!cols[2].empty()) r.map = std::stod(cols[2]);
      r.wall_ms = cols[3].empty() ? 0.0 : std::stod(cols[3]);
      out.push_back(r);
    } catch (const std::exception&) {
      throw IoError(path.string() + ": malformed row '" + line + "'");
    }
  }
  if (!header_seen) throw IoError(path.string() + ": missing header");
  return out;
}

}  // namespace dmmvh
