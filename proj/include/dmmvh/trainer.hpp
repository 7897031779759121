#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dmmvh/data.hpp"
#include "dmmvh/loss.hpp"
#include "dmmvh/net.hpp"
#include "dmmvh/optim.hpp"

namespace dmmvh {

enum class Ablation {
  kFull,
  kMetricOnly,  // mu = 0
  kQuantOnly,   // metric term removed
  kImageOnly,   // view 0 only
  kTextOnly,    // view 1 only
  kConcatOnly,  // identity fusion instead of context gating
};

std::string to_string(Ablation a);
Ablation parse_ablation(const std::string& s);

enum class LrSchedule { kConstant, kCosine };

std::string to_string(LrSchedule s);
LrSchedule parse_lr_schedule(const std::string& s);

struct TrainConfig {
  std::size_t bits = 16;
  std::size_t epochs = 500;
  std::size_t batch_size = 128;
  std::size_t proj_dim = 64;
  AdamWConfig adam;
  LrSchedule schedule = LrSchedule::kConstant;
  double dropout_p = 0.1;
  LossConfig loss;
  std::uint64_t seed = 1;
  // Evaluate every this many epochs; 0 disables periodic evaluation. The final epoch is
  // always evaluated when query and retrieval splits exist.
  std::size_t eval_every = 10;
  std::vector<std::size_t> cutoffs = {10, 50, 100, 200, 500};
  Ablation ablation = Ablation::kFull;
};

void validate(const TrainConfig& cfg);

// Resolved config as ordered key/value pairs; embedded in every output artifact.
std::vector<std::pair<std::string, std::string>> config_entries(const TrainConfig& cfg);

ModelConfig model_config_for(const TrainConfig& cfg, const std::vector<std::size_t>& view_dims);
// Loss settings after applying the ablation mode.
LossConfig loss_config_for(const TrainConfig& cfg);

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  std::optional<double> map;
  // Mean of | |h_k| - 1 | over the query codes, when evaluated.
  std::optional<double> code_gap;
  double wall_ms = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainState {
  ModelParams params;
  OptimState optim;
  std::size_t epoch = 0;  // epochs already completed
};

struct TrainResult {
  ModelConfig model;
  TrainState final_state;
  ModelParams best_params;
  std::optional<double> best_map;
  std::size_t best_epoch = 0;
  std::vector<EpochRecord> records;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Fresh parameters and optimizer state for cfg on a dataset with the given views.
TrainState initial_state(const TrainConfig& cfg, const std::vector<std::size_t>& view_dims);

// Runs epochs (resume.epoch, cfg.epochs]. Each batch: forward in train mode, total loss,
// backward, AdamW. Throws NumericError naming the epoch and batch on a non-finite loss.
TrainResult train(const DatasetSplit& data, const TrainConfig& cfg,
                  std::optional<TrainState> resume = std::nullopt,
                  const EpochCallback& on_epoch = {});

struct CodeEvaluation {
  double map = 0.0;
  double code_gap = 0.0;
};

// Encodes query and retrieval splits in eval mode, binarizes and scores full-ranking mAP.
CodeEvaluation evaluate_codes(const DatasetSplit& data, const ModelParams& params,
                              const ModelConfig& model);

// CSV "epoch,loss,map,wall_ms" preceded by "# key=value" config lines. map is blank for
// epochs without evaluation. wall_ms is written as 0 unless include_wall_time is set,
// which keeps identically seeded runs byte-identical.
void export_curves(const std::vector<EpochRecord>& records, const std::filesystem::path& path,
                   const std::vector<std::pair<std::string, std::string>>& config = {},
                   bool include_wall_time = false);
std::vector<EpochRecord> read_curves(const std::filesystem::path& path);

}  // namespace dmmvh
