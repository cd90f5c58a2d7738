#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "flmn/controller.hpp"
#include "flmn/episodes.hpp"

namespace flmn::harness {

struct TrainConfig {
  std::string model = "flmn";  // flmn | mann
  std::int64_t episodes = 5000;
  int batch = 16;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 10.0;
  int classes_per_episode = 5;   // C
  int samples_per_class = 10;    // S
  int memory_rows = 40;          // total locations; the split model uses half per memory
  int memory_width = 30;
  int hidden_width = 100;
  double gamma = 0.95;
  double memory_init = 1e-6;
  std::uint64_t seed = 1;
  std::int64_t eval_cadence = 500;      // episodes per metrics row
  std::int64_t checkpoint_cadence = 0;  // 0: final checkpoint only
  int threads = 0;                      // 0: auto
  bool deterministic = false;           // force single-threaded execution
  std::string dataset = "synthetic";    // synthetic | omniglot
  std::string data_root;
  int synthetic_classes = 25;
  int synthetic_samples = 20;
  double synthetic_noise = 0.1;
  std::int64_t omniglot_train_classes = 1209;
  bool augment = false;
  std::string out_dir = "out";

  void validate() const;
  controller::ModelKind model_kind() const { return controller::parse_model_kind(model); }
  controller::ModelConfig model_config() const;
  std::optional<episodes::AugmentationSpec> augmentation() const;
};

// Key-value config text: one `key = value` per line, `#` comments. Unknown
// keys are rejected with their line number.
TrainConfig parse_train_config(const std::string& text, const TrainConfig& base = {});
std::string serialize_train_config(const TrainConfig& cfg);
// Applies a single `key=value` override.
void apply_config_override(TrainConfig& cfg, const std::string& key, const std::string& value,
                           const std::string& source);
// All recognized keys, in canonical order.
std::vector<std::string> config_keys();

// Accuracy by presentation index (1st..S-th showing of a class).
struct InstanceAccuracyTable {
  std::vector<std::int64_t> correct;  // length S
  std::vector<std::int64_t> total;
  std::int64_t episode_count = 0;

  explicit InstanceAccuracyTable(int samples = 0)
      : correct(static_cast<std::size_t>(samples), 0),
        total(static_cast<std::size_t>(samples), 0) {}
  void record(int prediction, int target, int presentation);
  double accuracy(int presentation) const;  // 1-based
  int samples() const { return static_cast<int>(correct.size()); }
};

// Summed cross-entropy over steps and episodes plus per-step argmax
// predictions; state is freshly initialized per episode.
struct BatchRunResult {
  double loss_sum = 0.0;                         // over all episodes and steps
  std::vector<std::vector<int>> predictions;     // [episode][step]
};
BatchRunResult run_episode_batch(const controller::ParamSet& params,
                                 const episodes::EpisodeBatch& batch,
                                 const controller::ModelConfig& cfg);

struct Checkpoint {
  std::uint32_t version = 1;
  TrainConfig config;
  controller::ParamSet params;
  controller::ParamSet adam_m;
  controller::ParamSet adam_v;
  std::int64_t adam_step = 0;
  std::int64_t episode_counter = 0;
  // Stream position: together with config.seed this is the full generator
  // state, since every batch derives its seed from (seed, update index).
  std::int64_t update_counter = 0;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

struct LogRow {
  std::int64_t episode = 0;
  double loss = 0.0;
  std::vector<double> instance_accuracy;  // length S
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<LogRow> rows;
  std::string log_path;
  std::uint64_t stream_hash = 0;
  std::int64_t episodes_run = 0;
};

// Adam training over episode batches with global-norm gradient clipping.
// Writes `metrics.csv` (episode,loss,inst1..instS) and checkpoints under
// cfg.out_dir. Throws NumericError naming the episode and parameter norms if
// the loss goes non-finite.
TrainResult train(const TrainConfig& cfg, const episodes::ClassLibrary& library,
                  const Checkpoint* resume = nullptr);

// Forward-only evaluation; no parameter updates.
InstanceAccuracyTable evaluate(const controller::ModelConfig& cfg,
                               const controller::ParamSet& params,
                               const episodes::ClassLibrary& library, int n_episodes,
                               int classes_per_episode, int samples_per_class,
                               std::uint64_t seed,
                               const std::optional<episodes::AugmentationSpec>& augment = {});

// Loads the dataset a config names (synthetic library or Omniglot train
// split). The `train_side` flag selects the train or held-out half for
// class-split datasets.
episodes::ClassLibrary load_config_dataset(const TrainConfig& cfg, bool train_side);

}  // namespace flmn::harness
