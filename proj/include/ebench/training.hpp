#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "ebench/correlation.hpp"
#include "ebench/dataset.hpp"
#include "ebench/mos.hpp"
#include "ebench/optimizer.hpp"
#include "ebench/qa_model.hpp"

namespace ebench::train {

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 8;
  int stage1_epochs = 40;
  int stage2_epochs = 20;
  double alpha = 0.3;
  double margin = 0.0;
  std::uint64_t seed = 0;
  // Stage 2 keeps the visual-language backbones frozen unless this is set.
  bool unfreeze_vl = false;
  // Apply the loss to every active branch score as well as the fused score.
  bool branch_losses = true;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& doc);
};

struct Sample {
  std::string triplet_id;
  std::shared_ptr<const qa::TripletClips> clips;
  double target = 0;
};

// Decodes every triplet once and pairs it with its MOS. Errors when MOS is
// missing for any triplet.
std::vector<Sample> make_samples(const Manifest& manifest, const mos::MosTable& mos,
                                 const qa::ClipLoader& loader);
// Same clips, different subset.
std::vector<Sample> subset(const std::vector<Sample>& all, const std::vector<std::string>& ids);

struct EpochLog {
  int epoch = 0;  // global epoch across both stages
  int stage = 0;
  double loss = 0;
  double plcc_loss = 0;
  double rank_loss = 0;
  double lr = 0;
  int batches = 0;
  int skipped_batches = 0;
  nlohmann::json to_json() const;
};

// Groups updated in stage 1 and stage 2.
std::vector<std::string> trainable_groups(int stage, const TrainConfig& config);

class Trainer {
 public:
  Trainer(qa::QaModel& model, TrainConfig config);

  // Optional sinks: one JSON object per epoch, and human-readable warnings.
  void set_log(std::ostream* jsonl) { log_ = jsonl; }
  void set_warnings(std::ostream* warn) { warn_ = warn; }
  // Called after each epoch, e.g. to checkpoint.
  void set_epoch_callback(std::function<void(const EpochLog&)> cb) { on_epoch_ = std::move(cb); }

  void train_stage1(const std::vector<Sample>& data);
  void train_stage2(const std::vector<Sample>& data);
  // One epoch of `stage` at global epoch index `epoch`.
  EpochLog run_epoch(const std::vector<Sample>& data, int stage, int epoch);
  void configure_stage(int stage);

  optim::Adam& optimizer() { return adam_; }
  const std::vector<EpochLog>& history() const { return history_; }
  int completed_stage() const { return completed_stage_; }
  void set_completed_stage(int stage) { completed_stage_ = stage; }

 private:
  qa::QaModel& model_;
  TrainConfig config_;
  optim::Adam adam_;
  std::ostream* log_ = nullptr;
  std::ostream* warn_ = nullptr;
  std::function<void(const EpochLog&)> on_epoch_;
  std::vector<EpochLog> history_;
  int completed_stage_ = 0;
};

// Free-function forms of the two stages.
void train_stage1(qa::QaModel& model, const std::vector<Sample>& data, const TrainConfig& config);
void train_stage2(qa::QaModel& model, const std::vector<Sample>& data, const TrainConfig& config);

std::map<std::string, double> predict(const qa::QaModel& model, const std::vector<Sample>& data);

struct FoldResult {
  int fold = 0;
  std::vector<std::string> train_ids;
  std::map<std::string, double> predictions;  // held-out triplets only
  eval::CorrelationReport report;
  std::vector<EpochLog> history;
  nlohmann::json to_json() const;
};

struct KFoldResult {
  std::vector<FoldResult> folds;
  nlohmann::json summary;  // mean and median of each metric across folds
};

KFoldResult run_kfold(const Manifest& manifest, const mos::MosTable& mos, const FoldSplit& split,
                      const qa::ModelConfig& model_config, const TrainConfig& train_config,
                      const std::vector<Sample>& samples);

nlohmann::json summarize_folds(const std::vector<FoldResult>& folds);

}  // namespace ebench::train
