#include "cli.hpp"

#include <cmath>
#include <csignal>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "ebench/checkpoint.hpp"
#include "ebench/correlation.hpp"
#include "ebench/csv.hpp"
#include "ebench/dataset.hpp"
#include "ebench/error.hpp"
#include "ebench/metric_runner.hpp"
#include "ebench/mos.hpp"
#include "ebench/study_server.hpp"
#include "ebench/synthetic.hpp"
#include "ebench/training.hpp"

namespace ebench::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
};

json read_json_file(const fs::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw ValidationError(std::string("cannot open ") + what + " " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError(std::string(what) + " " + path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << doc.dump(2) << "\n";
}

fs::path ensure_out(const std::string& out) {
  if (out.empty()) throw ValidationError("--out is required");
  fs::create_directories(out);
  return out;
}

// Fills options not given on the command line from the --config document.
void apply_config(CLI::App& sub, const std::string& config_path) {
  if (config_path.empty()) return;
  const json doc = read_json_file(config_path, "config");
  if (!doc.is_object()) throw ValidationError("config " + config_path + " must be a JSON object");
  for (CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "help-all" || name == "config" || opt->count() > 0) continue;
    std::string key = name;
    if (!doc.contains(key)) {
      std::replace(key.begin(), key.end(), '-', '_');
      if (!doc.contains(key)) continue;
    }
    const json& v = doc.at(key);
    auto as_text = [](const json& x) {
      return x.is_string() ? x.get<std::string>()
             : x.is_boolean() ? std::string(x.get<bool>() ? "true" : "false")
                              : x.dump();
    };
    if (v.is_array()) {
      std::vector<std::string> items;
      for (const auto& x : v) items.push_back(as_text(x));
      opt->add_result(items);
    } else {
      opt->add_result(as_text(v));
    }
    opt->run_callback();
  }
}

void write_resolved_config(CLI::App& sub, const fs::path& dir) {
  json options = json::object();
  for (CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "help-all") continue;
    const auto& results = opt->results();
    if (!results.empty()) {
      options[name] = results.size() == 1 && opt->get_expected_max() <= 1 ? json(results.front())
                                                                            : json(results);
    } else if (!opt->get_default_str().empty()) {
      options[name] = opt->get_default_str();
    } else {
      options[name] = nullptr;
    }
  }
  write_json_file(dir / "resolved_config.json", {{"command", sub.get_name()}, {"options", options}});
}

void add_common(CLI::App* sub, Common& c, bool needs_out = true) {
  sub->add_option("--config", c.config, "JSON file supplying defaults for any option");
  sub->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  auto* out = sub->add_option("--out", c.out, "Output directory");
  if (!needs_out) out->description("Output directory (optional)");
}

qa::ModelConfig load_model_config(const std::string& path) {
  if (path.empty()) return qa::ModelConfig::toy();
  return qa::ModelConfig::from_json(read_json_file(path, "model config"));
}

train::TrainConfig load_train_config(const std::string& path) {
  if (path.empty()) return {};
  return train::TrainConfig::from_json(read_json_file(path, "train config"));
}

// --- mos ---------------------------------------------------------------

struct MosArgs {
  std::string ratings;
  std::optional<double> rescale_lo, rescale_hi;
};

int cmd_mos(const Common& c, const MosArgs& a) {
  const auto dir = ensure_out(c.out);
  const auto ratings = mos::read_ratings_csv(fs::path(a.ratings));
  auto result = mos::run_pipeline(ratings);
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
  if (a.rescale_lo.has_value() != a.rescale_hi.has_value()) {
    throw ValidationError("--rescale-lo and --rescale-hi must be given together");
  }
  if (a.rescale_lo) result.table = mos::rescale_mos(result.table, *a.rescale_lo, *a.rescale_hi);
  mos::write_mos_csv(dir / "mos.csv", result.table);
  json details = json::array();
  for (const auto& d : result.screening.details) {
    details.push_back({{"annotator_id", d.annotator_id},
                       {"ratings", d.ratings},
                       {"above", d.above},
                       {"below", d.below},
                       {"rejected", d.rejected}});
  }
  write_json_file(dir / "rejected.json", {{"rejected", result.screening.rejected},
                                          {"screening", details},
                                          {"warnings", result.warnings}});
  std::cerr << "mos: " << result.table.entries.size() << " triplets, "
            << result.screening.rejected.size() << " annotator(s) rejected\n";
  return kExitOk;
}

// --- metrics -----------------------------------------------------------

struct MetricsArgs {
  std::string manifest;
  std::vector<std::string> metrics;
  std::vector<std::string> backends{"stub"};
};

int cmd_metrics(const Common& c, const MetricsArgs& a) {
  const auto names = metrics::resolve_metrics(a.metrics);
  const auto backends = metrics::make_backends(a.backends, c.seed);
  const auto dir = ensure_out(c.out);
  const Manifest manifest = load_manifest(a.manifest);
  const auto decoder = default_decoder();
  const auto rows = metrics::run_metrics(manifest, names, backends, *decoder);
  metrics::write_metrics_csv(dir / "metrics.csv", names, rows);
  metrics::write_metric_errors_csv(dir / "metric_errors.csv", rows);
  std::size_t failed = 0;
  for (const auto& r : rows) {
    for (const auto& [metric, err] : r.errors) {
      std::cerr << "error: " << r.triplet_id << " " << metric << ": " << err << "\n";
      ++failed;
    }
  }
  if (failed) {
    std::cerr << "metrics: " << failed << " metric value(s) failed; see metric_errors.csv\n";
    return kExitPartial;
  }
  return kExitOk;
}

// --- train -------------------------------------------------------------

struct TrainArgs {
  std::string manifest, mos, model_config, train_config, resume;
};

int cmd_train(const Common& c, const TrainArgs& a, bool seed_given) {
  const auto dir = ensure_out(c.out);
  const Manifest manifest = load_manifest(a.manifest);
  const auto table = mos::read_mos_csv(a.mos);
  const auto mc = load_model_config(a.model_config);
  auto tc = load_train_config(a.train_config);
  if (seed_given) tc.seed = c.seed;
  write_json_file(dir / "model_config.json", mc.to_json());
  write_json_file(dir / "train_config.json", tc.to_json());

  qa::QaModel model(mc);
  train::Trainer trainer(model, tc);
  int done_stage = 0;
  if (!a.resume.empty()) {
    const auto info = ckpt::load(a.resume, model, &trainer.optimizer());
    done_stage = info.stage;
    std::cerr << "train: resumed from " << a.resume << " (stage " << info.stage << ")\n";
  }
  const auto samples = train::make_samples(manifest, table, qa::manifest_loader(manifest));
  std::ofstream log(dir / "train_log.jsonl", done_stage > 0 ? std::ios::app : std::ios::trunc);
  trainer.set_log(&log);
  trainer.set_warnings(&std::cerr);
  if (done_stage < 1) {
    trainer.train_stage1(samples);
    ckpt::save(dir / "stage1.ckpt", model, &trainer.optimizer(), 1, tc.stage1_epochs);
  }
  if (done_stage < 2) {
    trainer.train_stage2(samples);
    ckpt::save(dir / "stage2.ckpt", model, &trainer.optimizer(), 2,
               tc.stage1_epochs + tc.stage2_epochs);
  }
  eval::write_predictions_csv(dir / "train_predictions.csv", train::predict(model, samples));
  return kExitOk;
}

// --- eval --------------------------------------------------------------

struct EvalArgs {
  std::string predictions, mos;
};

int cmd_eval(const Common& c, const EvalArgs& a) {
  const auto dir = ensure_out(c.out);
  const auto preds = eval::read_predictions_csv(a.predictions);
  const auto table = mos::read_mos_csv(a.mos);
  const auto aligned = eval::align(preds, table);
  const auto report = eval::correlate(aligned.pred, aligned.gt);
  json doc = report.to_json();
  doc["mos_table"] = a.mos;
  doc["predictions"] = a.predictions;
  write_json_file(dir / "report.json", doc);
  std::optional<eval::Poly4Fit> fit;
  try {
    fit = eval::poly4_fit(aligned.pred, aligned.gt);
  } catch (const ValidationError&) {
  }
  eval::write_scatter_csv(dir / "scatter.csv", aligned, fit);
  return kExitOk;
}

// --- tenfold -----------------------------------------------------------

struct TenfoldArgs {
  std::string manifest, mos, model_config, train_config, folds;
  int k = 10;
};

int cmd_tenfold(const Common& c, const TenfoldArgs& a, bool seed_given) {
  const auto dir = ensure_out(c.out);
  const Manifest manifest = load_manifest(a.manifest);
  const auto table = mos::read_mos_csv(a.mos);
  const auto mc = load_model_config(a.model_config);
  auto tc = load_train_config(a.train_config);
  if (seed_given) tc.seed = c.seed;
  const FoldSplit split = a.folds.empty() ? make_folds(manifest, a.k, c.seed)
                                          : folds_from_json(read_json_file(a.folds, "folds"));
  write_json_file(dir / "folds.json", folds_to_json(split));
  const auto samples = train::make_samples(manifest, table, qa::manifest_loader(manifest));
  const auto result = train::run_kfold(manifest, table, split, mc, tc, samples);
  std::map<std::string, double> all;
  char name[32];
  for (const auto& f : result.folds) {
    std::snprintf(name, sizeof name, "fold_%02d.json", f.fold);
    write_json_file(dir / name, f.to_json());
    all.insert(f.predictions.begin(), f.predictions.end());
  }
  write_json_file(dir / "summary.json", result.summary);
  {
    std::ofstream out(dir / "summary.csv");
    csv::write_row(out, {"statistic", "srocc", "plcc", "krcc", "rmse"});
    for (const char* stat : {"mean", "median"}) {
      const auto& s = result.summary.at(stat);
      csv::write_row(out, {stat, csv::format_double(s.at("srocc")), csv::format_double(s.at("plcc")),
                           csv::format_double(s.at("krcc")), csv::format_double(s.at("rmse"))});
    }
  }
  eval::write_predictions_csv(dir / "predictions.csv", all);
  return kExitOk;
}

// --- small commands ----------------------------------------------------

int cmd_folds(const Common& c, const std::string& manifest_path, int k) {
  const auto dir = ensure_out(c.out);
  write_json_file(dir / "folds.json", folds_to_json(make_folds(load_manifest(manifest_path), k, c.seed)));
  return kExitOk;
}

int cmd_stats(const Common& c, const std::string& manifest_path) {
  const auto dir = ensure_out(c.out);
  write_json_file(dir / "stats.json", dataset_stats(load_manifest(manifest_path)).to_json());
  return kExitOk;
}

struct SynthArgs {
  synth::Options options;
  int annotators = 16;
};

int cmd_synth(const Common& c, SynthArgs a) {
  const auto dir = ensure_out(c.out);
  a.options.seed = c.seed;
  synth::write_dataset(synth::make_dataset(a.options), dir, a.annotators);
  return kExitOk;
}

struct ScoreArgs {
  std::string manifest, model_config, checkpoint;
};

int cmd_score(const Common& c, const ScoreArgs& a) {
  const auto dir = ensure_out(c.out);
  const Manifest manifest = load_manifest(a.manifest);
  qa::ModelConfig mc = load_model_config(a.model_config);
  if (!a.checkpoint.empty() && a.model_config.empty()) {
    mc = qa::ModelConfig::from_json(ckpt::peek(a.checkpoint).config);
  }
  qa::QaModel model(mc);
  if (!a.checkpoint.empty()) ckpt::load(a.checkpoint, model, nullptr);
  const auto scores =
      qa::qa_forward_batch(manifest.triplets(), model, qa::manifest_loader(manifest));
  std::ofstream out(dir / "scores.csv");
  csv::write_row(out, {"triplet_id", "alignment", "relevance", "aesthetic", "technical", "final"});
  std::map<std::string, double> preds;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& s = scores[i];
    const auto& id = manifest.triplets()[i].triplet_id;
    csv::write_row(out, {id, csv::format_double(s.alignment), csv::format_double(s.relevance),
                         csv::format_double(s.aesthetic), csv::format_double(s.technical),
                         csv::format_double(s.final)});
    preds[id] = s.final;
  }
  eval::write_predictions_csv(dir / "predictions.csv", preds);
  return kExitOk;
}

study::StudyServer* g_server = nullptr;

int cmd_serve(const std::string& data, const std::string& host, int port) {
  study::StudyStore store(data);
  study::StudyServer server(store);
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_server) g_server->stop();
  });
  std::cerr << "serve: listening on " << host << ":" << port << " (data " << data << ")\n";
  server.run(host, port);
  g_server = nullptr;
  store.snapshot();
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Benchmark toolkit for scoring text-driven video edits", "ebench"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  std::map<CLI::App*, std::function<int()>> handlers;
  std::map<CLI::App*, Common> commons;
  auto sub = [&](const char* name, const char* desc, bool needs_out = true) {
    auto* s = app.add_subcommand(name, desc);
    add_common(s, commons[s], needs_out);
    return s;
  };

  MosArgs mos_args;
  auto* mos = sub("mos", "Screen, normalize and aggregate raw ratings into MOS");
  mos->add_option("--ratings", mos_args.ratings, "Ratings CSV")->required();
  mos->add_option("--rescale-lo", mos_args.rescale_lo, "Rescale MOS onto [lo, hi]");
  mos->add_option("--rescale-hi", mos_args.rescale_hi);
  handlers[mos] = [&] { return cmd_mos(commons[mos], mos_args); };

  MetricsArgs metrics_args;
  auto* met = sub("metrics", "Compute objective metrics per triplet");
  met->add_option("--manifest", metrics_args.manifest, "Manifest JSON")->required();
  met->add_option("--metric", metrics_args.metrics, "Metric names")->required();
  met->add_option("--backend", metrics_args.backends, "Backend specs")->capture_default_str();
  handlers[met] = [&] { return cmd_metrics(commons[met], metrics_args); };

  TrainArgs train_args;
  auto* trn = sub("train", "Two-stage training of the quality assessor");
  trn->add_option("--manifest", train_args.manifest)->required();
  trn->add_option("--mos", train_args.mos, "MOS CSV")->required();
  trn->add_option("--model-config", train_args.model_config, "Model config JSON");
  trn->add_option("--train-config", train_args.train_config, "Training config JSON");
  trn->add_option("--resume", train_args.resume, "Checkpoint to resume from");
  handlers[trn] = [&] {
    return cmd_train(commons[trn], train_args, trn->get_option("--seed")->count() > 0);
  };

  EvalArgs eval_args;
  auto* evl = sub("eval", "Correlate predictions with MOS");
  evl->add_option("--predictions", eval_args.predictions, "Predictions CSV")->required();
  evl->add_option("--mos", eval_args.mos, "MOS CSV")->required();
  handlers[evl] = [&] { return cmd_eval(commons[evl], eval_args); };

  TenfoldArgs tf_args;
  auto* tf = sub("tenfold", "k-fold train/evaluate protocol");
  tf->add_option("--manifest", tf_args.manifest)->required();
  tf->add_option("--mos", tf_args.mos)->required();
  tf->add_option("--model-config", tf_args.model_config);
  tf->add_option("--train-config", tf_args.train_config);
  tf->add_option("--folds", tf_args.folds, "Precomputed folds JSON");
  tf->add_option("--k", tf_args.k, "Number of folds")->capture_default_str();
  handlers[tf] = [&] {
    return cmd_tenfold(commons[tf], tf_args, tf->get_option("--seed")->count() > 0);
  };

  std::string folds_manifest;
  int folds_k = 10;
  auto* fld = sub("folds", "Split a manifest into source-disjoint folds");
  fld->add_option("--manifest", folds_manifest)->required();
  fld->add_option("--k", folds_k)->capture_default_str();
  handlers[fld] = [&] { return cmd_folds(commons[fld], folds_manifest, folds_k); };

  std::string stats_manifest;
  auto* sts = sub("stats", "Dataset statistics");
  sts->add_option("--manifest", stats_manifest)->required();
  handlers[sts] = [&] { return cmd_stats(commons[sts], stats_manifest); };

  SynthArgs synth_args;
  auto* syn = sub("synth", "Write a synthetic dataset with planted MOS");
  syn->add_option("--triplets", synth_args.options.triplets)->capture_default_str();
  syn->add_option("--sources", synth_args.options.sources)->capture_default_str();
  syn->add_option("--frames", synth_args.options.frames)->capture_default_str();
  syn->add_option("--width", synth_args.options.width)->capture_default_str();
  syn->add_option("--height", synth_args.options.height)->capture_default_str();
  syn->add_option("--annotators", synth_args.annotators)->capture_default_str();
  handlers[syn] = [&] { return cmd_synth(commons[syn], synth_args); };

  ScoreArgs score_args;
  auto* scr = sub("score", "Score triplets with the quality assessor");
  scr->add_option("--manifest", score_args.manifest)->required();
  scr->add_option("--model-config", score_args.model_config);
  scr->add_option("--checkpoint", score_args.checkpoint);
  handlers[scr] = [&] { return cmd_score(commons[scr], score_args); };

  std::string serve_data, serve_host = "127.0.0.1";
  int serve_port = 8080;
  auto* srv = sub("serve", "Run the subjective-study HTTP service", false);
  srv->add_option("--data", serve_data, "Study data directory")->required();
  srv->add_option("--host", serve_host)->capture_default_str();
  srv->add_option("--port", serve_port)->capture_default_str();
  handlers[srv] = [&] { return cmd_serve(serve_data, serve_host, serve_port); };

  try {
    // Required options may come from --config, so check them afterwards.
    std::vector<std::pair<CLI::App*, CLI::Option*>> required;
    for (auto* s : app.get_subcommands({})) {
      for (auto* o : s->get_options()) {
        if (o->get_required()) {
          o->required(false);
          required.emplace_back(s, o);
        }
      }
    }
    app.parse(argc, argv);
    CLI::App* chosen = app.get_subcommands().front();
    const auto& common = commons[chosen];
    apply_config(*chosen, common.config);
    for (auto [owner, o] : required) {
      if (owner == chosen && o->count() == 0) {
        throw ValidationError(o->get_name() + " is required (on the command line or in --config)");
      }
    }
    const fs::path record_dir = chosen == srv ? fs::path(serve_data) : fs::path(common.out);
    if (!record_dir.empty()) {
      fs::create_directories(record_dir);
      write_resolved_config(*chosen, record_dir);
    }
    return handlers.at(chosen)();
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e) == 0 ? kExitOk : kExitValidation;
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e) == 0 ? kExitOk : kExitValidation;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const NotFoundError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"ebench"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace ebench::cli
