#include "connlearn/commands.hpp"

#include <fstream>
#include <iostream>

#include "connlearn/checkpoint.hpp"
#include "connlearn/errors.hpp"
#include "connlearn/io.hpp"
#include "connlearn/pipeline.hpp"

namespace connlearn {

namespace fs = std::filesystem;
using nlohmann::json;

TrainConfig merged_config(const TrainConfig& base, const std::optional<fs::path>& file, const json& overrides) {
  TrainConfig c = base;
  if (file) c.merge_json(read_json(*file));
  c.merge_json(overrides);
  c.validate();
  return c;
}

void cmd_synth(const SynthCommand& cmd) {
  Dataset ds = synth_generate(cmd.synth);
  if (cmd.unlabeled) ds = strip_labels(std::move(ds));
  save_dataset(ds, cmd.out);
}

namespace {

PriorCache make_cache(const std::optional<fs::path>& dir) {
  return dir ? PriorCache(*dir) : PriorCache();
}

}  // namespace

TrainConfig cmd_pretrain(const PretrainCommand& cmd) {
  const TrainConfig config = merged_config(TrainConfig{}, cmd.config, cmd.overrides);
  std::cerr << "config: " << config.to_json().dump() << "\n";
  const Dataset ds = load_dataset(cmd.data);
  PriorCache cache = make_cache(cmd.prior_cache);
  const auto subjects = prepare_subjects(ds, config, cache);

  fs::create_directories(cmd.out);
  write_json(cmd.out / "config.json", config.to_json());
  TrainOptions options;
  options.log_wall_time = cmd.log_timing;
  const PretrainResult result = pretrain(subjects, config, options);

  std::string log;
  for (const auto& e : result.log) log += e.to_json().dump() + "\n";
  write_file_atomic(cmd.out / "train_log.jsonl", log);
  // Checkpoint files last; each is renamed into place whole.
  const fs::path staging = cmd.out / ".checkpoint";
  save_checkpoint(staging, result.model, config, Stage::pretrained);
  fs::rename(staging / "params.bin", cmd.out / "params.bin");
  fs::rename(staging / "manifest.json", cmd.out / "manifest.json");
  fs::remove_all(staging);
  return config;
}

json cmd_finetune(const FinetuneCommand& cmd) {
  const Checkpoint ck = load_checkpoint(cmd.ckpt);
  if (ck.stage != Stage::pretrained) {
    throw UsageError("fine-tuning must start from a pretrained checkpoint, got stage '" +
                     std::string(stage_name(ck.stage)) + "'");
  }
  const TrainConfig config = merged_config(ck.config, cmd.config, cmd.overrides);
  const Dataset ds = load_dataset(cmd.data);
  if (!ds.labeled) throw SchemaError("fine-tuning needs a labeled dataset");
  PriorCache cache = make_cache(cmd.prior_cache);
  const auto subjects = prepare_subjects(ds, config, cache);
  const FinetuneResult result = finetune(subjects, ck.model, config, cmd.folds);

  json folds = json::array();
  for (const auto& f : result.folds) {
    folds.push_back(json{{"fold", f.fold},
                         {"n_train", f.train_ids.size()},
                         {"n_test", f.test_ids.size()},
                         {"test_ids", f.test_ids},
                         {"metrics", f.metrics.to_json()},
                         {"final_loss", f.log.empty() ? json(nullptr) : json(f.log.back().report.total)}});
    if (cmd.fold_checkpoints) {
      save_checkpoint(*cmd.fold_checkpoints / ("fold_" + std::to_string(f.fold)), f.fitted, config,
                      Stage::finetuned);
    }
  }
  json results{{"format_version", 1},
               {"folds", std::move(folds)},
               {"aggregate", result.aggregate.to_json()},
               {"config", config.to_json()},
               {"checkpoint_sha256", checkpoint_digest(cmd.ckpt)},
               {"learner_sha256_before", result.learner_digest_before},
               {"learner_sha256_after", result.learner_digest_after}};
  write_json(cmd.out, results);
  return results;
}

namespace {

PreparedSubject prepare_one(const Dataset& ds, const std::string& id, const TrainConfig& config) {
  Dataset one;
  one.name = ds.name;
  one.n_regions = ds.n_regions;
  one.labeled = false;
  one.subjects.push_back(ds.find(id));
  one.subjects.back().label.reset();
  PriorCache cache;
  return std::move(prepare_subjects(one, config, cache).front());
}

}  // namespace

void cmd_export_graph(const ExportGraphCommand& cmd) {
  const Checkpoint ck = load_checkpoint(cmd.ckpt);
  const Dataset ds = load_dataset(cmd.data);
  const PreparedSubject subject = prepare_one(ds, cmd.subject, ck.config);
  if (cmd.iteration < 0 || cmd.iteration > ck.model.shape.layers) {
    throw UsageError("iteration must lie in [0, " + std::to_string(ck.model.shape.layers) + "]");
  }
  if (subject.features.cols() != ck.model.shape.timepoints) {
    throw SchemaError("subject '" + cmd.subject + "' length differs from the checkpoint's");
  }
  const SubjectInference inf = infer_subject(ck.model, subject, ck.config.adaptive_learner);
  write_csv_matrix(cmd.out, inf.graphs[view_index(cmd.view)][static_cast<std::size_t>(cmd.iteration)].values);
}

void cmd_export_prior(const ExportPriorCommand& cmd) {
  const Dataset ds = load_dataset(cmd.data);
  TrainConfig config;
  config.te_bins = cmd.bins;
  config.te_lag = cmd.lag;
  config.standardize = cmd.standardize;
  const PreparedSubject subject = prepare_one(ds, cmd.subject, config);
  write_csv_matrix(cmd.out, subject.prior(cmd.kind == PriorKind::pearson ? View::fc : View::ec).values);
}

json cmd_gradcheck(const GradcheckCommand& cmd) {
  DeskScale scale;
  if (cmd.scale == "tiny") {
    scale = DeskScale{4, 12, 1, 1, 1, 3, 2, 2};
  } else if (cmd.scale != "desk") {
    throw UsageError("unknown gradcheck scale '" + cmd.scale + "' (expected desk or tiny)");
  }
  GradcheckOptions options;
  options.corrupt_param = cmd.corrupt_param;
  const auto reports = gradcheck_suite(cmd.seed, scale, options);
  json out{{"seed", cmd.seed}, {"scale", cmd.scale}, {"pass", true}, {"objectives", json::array()}};
  for (const auto& r : reports) {
    out["objectives"].push_back(r.to_json());
    if (!r.pass) out["pass"] = false;
  }
  if (cmd.corrupt_param) {
    bool found = false;
    for (const auto& r : reports) {
      for (const auto& e : r.entries) found = found || e.param == *cmd.corrupt_param;
    }
    if (!found) throw UsageError("no trainable parameter named '" + *cmd.corrupt_param + "'");
  }
  if (cmd.out) write_json(*cmd.out, out);
  return out;
}

}  // namespace connlearn
