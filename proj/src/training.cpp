#include "ebench/training.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <ostream>
#include <random>
#include <set>

#include "ebench/error.hpp"
#include "ebench/losses.hpp"

namespace ebench::train {

using nlohmann::json;

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw ValidationError("train config: learning_rate must be positive");
  if (batch_size < 2) {
    throw ValidationError("train config: batch_size must be at least 2 (PLCC needs 2 samples)");
  }
  if (stage1_epochs < 0 || stage2_epochs < 0) {
    throw ValidationError("train config: epochs must be non-negative");
  }
  if (alpha < 0) throw ValidationError("train config: alpha must be non-negative");
  if (margin < 0) throw ValidationError("train config: margin must be non-negative");
}

json TrainConfig::to_json() const {
  return {{"learning_rate", learning_rate}, {"batch_size", batch_size},
          {"stage1_epochs", stage1_epochs}, {"stage2_epochs", stage2_epochs},
          {"alpha", alpha},                 {"margin", margin},
          {"seed", seed},                   {"unfreeze_vl", unfreeze_vl},
          {"branch_losses", branch_losses}, {"optimizer", "adam"},
          {"schedule", "cosine"}};
}

TrainConfig TrainConfig::from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("train config must be a JSON object");
  static const std::set<std::string> known{
      "learning_rate", "batch_size", "stage1_epochs", "stage2_epochs", "alpha", "margin",
      "seed", "unfreeze_vl", "branch_losses", "optimizer", "schedule"};
  TrainConfig c;
  try {
    for (const auto& [key, value] : doc.items()) {
      if (!known.count(key)) throw ValidationError("train config: unknown key '" + key + "'");
    }
    if (doc.contains("optimizer") && doc.at("optimizer") != "adam") {
      throw ValidationError("train config: only the adam optimizer is supported");
    }
    if (doc.contains("schedule") && doc.at("schedule") != "cosine") {
      throw ValidationError("train config: only the cosine schedule is supported");
    }
    c.learning_rate = doc.value("learning_rate", c.learning_rate);
    c.batch_size = doc.value("batch_size", c.batch_size);
    c.stage1_epochs = doc.value("stage1_epochs", c.stage1_epochs);
    c.stage2_epochs = doc.value("stage2_epochs", c.stage2_epochs);
    c.alpha = doc.value("alpha", c.alpha);
    c.margin = doc.value("margin", c.margin);
    c.seed = doc.value("seed", c.seed);
    c.unfreeze_vl = doc.value("unfreeze_vl", c.unfreeze_vl);
    c.branch_losses = doc.value("branch_losses", c.branch_losses);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

std::vector<Sample> make_samples(const Manifest& manifest, const mos::MosTable& mos,
                                 const qa::ClipLoader& loader) {
  std::vector<std::string> missing;
  for (const auto& t : manifest.triplets()) {
    if (!mos.entries.count(t.triplet_id)) missing.push_back(t.triplet_id);
  }
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size() && i < 10; ++i) list += (i ? ", " : "") + missing[i];
    if (missing.size() > 10) list += ", ...";
    throw ValidationError("MOS missing for " + std::to_string(missing.size()) +
                          " triplet(s): " + list);
  }
  const auto& triplets = manifest.triplets();
  std::vector<Sample> out(triplets.size());
  std::vector<std::exception_ptr> errors(triplets.size());
  const auto n = static_cast<std::ptrdiff_t>(triplets.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      const auto& t = triplets[i];
      out[i] = {t.triplet_id, std::make_shared<const qa::TripletClips>(loader(t)),
                mos.entries.at(t.triplet_id).mos};
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

std::vector<Sample> subset(const std::vector<Sample>& all, const std::vector<std::string>& ids) {
  std::map<std::string, const Sample*> index;
  for (const auto& s : all) index[s.triplet_id] = &s;
  std::vector<Sample> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = index.find(id);
    if (it == index.end()) throw NotFoundError("no sample for triplet " + id);
    out.push_back(*it->second);
  }
  return out;
}

json EpochLog::to_json() const {
  return {{"epoch", epoch},         {"stage", stage}, {"loss", loss},
          {"plcc_loss", plcc_loss}, {"rank_loss", rank_loss}, {"lr", lr}};
}

std::vector<std::string> trainable_groups(int stage, const TrainConfig& config) {
  std::vector<std::string> g{"adapter", "align_head", "rel_head", "aesthetic_head",
                             "technical_head"};
  if (stage >= 2) {
    for (const char* s : {"aesthetic", "technical", "rel_source", "rel_edited"}) g.push_back(s);
    if (config.unfreeze_vl) {
      g.push_back("vl_visual");
      g.push_back("vl_text");
    }
  }
  return g;
}

Trainer::Trainer(qa::QaModel& model, TrainConfig config)
    : model_(model), config_(config), adam_(model.params()) {
  config_.validate();
}

void Trainer::configure_stage(int stage) {
  auto& params = model_.params();
  params.freeze_all();
  for (const auto& g : trainable_groups(stage, config_)) params.set_trainable(g, true);
  params.zero_grad();
}

EpochLog Trainer::run_epoch(const std::vector<Sample>& data, int stage, int epoch) {
  if (data.empty()) throw ValidationError("training set is empty");
  const int horizon = config_.stage1_epochs + config_.stage2_epochs;
  EpochLog log;
  log.epoch = epoch;
  log.stage = stage;
  log.lr = optim::cosine_lr(config_.learning_rate, epoch, horizon);

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(config_.seed * 1000003ULL + static_cast<std::uint64_t>(epoch));
  std::shuffle(order.begin(), order.end(), rng);

  const auto& cfg = model_.config();
  const std::size_t bs = static_cast<std::size_t>(config_.batch_size);
  for (std::size_t start = 0; start < order.size(); start += bs) {
    const std::size_t end = std::min(start + bs, order.size());
    if (end - start < 2) {
      ++log.skipped_batches;
      if (warn_) {
        *warn_ << "warning: epoch " << epoch << ": skipping batch of size 1 (PLCC undefined)\n";
      }
      continue;
    }
    std::vector<double> gt;
    std::vector<nn::Tensor> finals;
    std::array<std::vector<nn::Tensor>, 4> branches;
    for (std::size_t i = start; i < end; ++i) {
      const auto& s = data[order[i]];
      const auto out = model_.forward(s.clips->source, s.clips->edited, s.clips->prompt);
      finals.push_back(out.final);
      for (qa::Branch b : qa::kBranches) {
        const auto& t = out.branch[static_cast<int>(b)];
        if (t.defined()) branches[static_cast<int>(b)].push_back(t);
      }
      gt.push_back(s.target);
    }
    // Constant targets carry no correlation signal.
    if (std::all_of(gt.begin(), gt.end(), [&](double v) { return v == gt.front(); })) {
      ++log.skipped_batches;
      if (warn_) *warn_ << "warning: epoch " << epoch << ": skipping batch with constant MOS\n";
      continue;
    }
    const nn::Tensor pred = nn::concat_rows(finals);
    const auto parts = loss::total_loss(pred.data(), gt, config_.alpha, config_.margin);
    const auto plcc_part = loss::plcc_loss(pred.data(), gt);
    nn::Tensor total = loss::total_loss_node(pred, gt, config_.alpha, config_.margin);
    if (config_.branch_losses) {
      for (qa::Branch b : qa::kBranches) {
        auto& bt = branches[static_cast<int>(b)];
        if (bt.size() != finals.size() || cfg.effective_weight(b) == 0.0) continue;
        total = nn::add(total, loss::total_loss_node(nn::concat_rows(bt), gt, config_.alpha,
                                                     config_.margin));
      }
    }
    nn::backward(total);
    adam_.step(log.lr);
    model_.params().zero_grad();

    log.loss += parts.value;
    log.plcc_loss += plcc_part.value;
    log.rank_loss += config_.alpha > 0 ? (parts.value - plcc_part.value) / config_.alpha
                                       : loss::rank_loss(pred.data(), gt, config_.margin).value;
    ++log.batches;
  }
  if (log.batches > 0) {
    log.loss /= log.batches;
    log.plcc_loss /= log.batches;
    log.rank_loss /= log.batches;
  }
  history_.push_back(log);
  if (log_) *log_ << log.to_json().dump() << "\n" << std::flush;
  if (on_epoch_) on_epoch_(log);
  return log;
}

void Trainer::train_stage1(const std::vector<Sample>& data) {
  if (data.empty()) throw ValidationError("training set is empty");
  configure_stage(1);
  for (int e = 0; e < config_.stage1_epochs; ++e) run_epoch(data, 1, e);
  completed_stage_ = 1;
}

void Trainer::train_stage2(const std::vector<Sample>& data) {
  if (data.empty()) throw ValidationError("training set is empty");
  configure_stage(2);
  for (int e = 0; e < config_.stage2_epochs; ++e) run_epoch(data, 2, config_.stage1_epochs + e);
  completed_stage_ = 2;
}

void train_stage1(qa::QaModel& model, const std::vector<Sample>& data, const TrainConfig& config) {
  Trainer(model, config).train_stage1(data);
}

void train_stage2(qa::QaModel& model, const std::vector<Sample>& data, const TrainConfig& config) {
  Trainer(model, config).train_stage2(data);
}

std::map<std::string, double> predict(const qa::QaModel& model, const std::vector<Sample>& data) {
  std::vector<double> scores(data.size());
  std::vector<std::exception_ptr> errors(data.size());
  const auto n = static_cast<std::ptrdiff_t>(data.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      const auto& c = *data[i].clips;
      scores[i] = model.score(c.source, c.edited, c.prompt).final;
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < data.size(); ++i) out[data[i].triplet_id] = scores[i];
  return out;
}

json FoldResult::to_json() const {
  json preds = json::object();
  for (const auto& [id, v] : predictions) preds[id] = v;
  json hist = json::array();
  for (const auto& h : history) hist.push_back(h.to_json());
  return {{"fold", fold},
          {"report", report.to_json()},
          {"predictions", preds},
          {"train_ids", train_ids},
          {"history", hist}};
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

json summarize_folds(const std::vector<FoldResult>& folds) {
  if (folds.empty()) throw ValidationError("no folds to summarize");
  std::map<std::string, std::vector<double>> metrics;
  for (const auto& f : folds) {
    metrics["srocc"].push_back(f.report.srocc);
    metrics["plcc"].push_back(f.report.plcc);
    metrics["krcc"].push_back(f.report.krcc);
    metrics["rmse"].push_back(f.report.rmse);
  }
  json mean = json::object(), med = json::object();
  for (const auto& [name, values] : metrics) {
    double s = 0;
    for (double v : values) s += v;
    mean[name] = s / static_cast<double>(values.size());
    med[name] = median(values);
  }
  return {{"folds", folds.size()}, {"mean", mean}, {"median", med}};
}

KFoldResult run_kfold(const Manifest& manifest, const mos::MosTable& mos, const FoldSplit& split,
                      const qa::ModelConfig& model_config, const TrainConfig& train_config,
                      const std::vector<Sample>& samples) {
  for (const auto& t : manifest.triplets()) {
    if (!mos.entries.count(t.triplet_id)) {
      throw ValidationError("MOS missing for triplet " + t.triplet_id);
    }
  }
  KFoldResult result;
  for (int fold = 0; fold < split.k; ++fold) {
    const auto held = split.triplets_in(manifest, fold, true);
    const auto train_ids = split.triplets_in(manifest, fold, false);
    if (held.empty() || train_ids.empty()) {
      throw ValidationError("fold " + std::to_string(fold) + " has an empty split");
    }
    qa::QaModel model(model_config);
    TrainConfig cfg = train_config;
    cfg.seed = train_config.seed + static_cast<std::uint64_t>(fold);
    Trainer trainer(model, cfg);
    const auto train_data = subset(samples, train_ids);
    trainer.train_stage1(train_data);
    trainer.train_stage2(train_data);

    FoldResult fr;
    fr.fold = fold;
    fr.train_ids = train_ids;
    fr.predictions = predict(model, subset(samples, held));
    mos::MosTable held_mos;
    for (const auto& id : held) held_mos.entries[id] = mos.entries.at(id);
    fr.report = eval::correlate_report(fr.predictions, held_mos);
    fr.history = trainer.history();
    result.folds.push_back(std::move(fr));
  }
  result.summary = summarize_folds(result.folds);
  return result;
}

}  // namespace ebench::train
