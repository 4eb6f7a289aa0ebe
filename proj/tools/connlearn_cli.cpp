#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "connlearn/commands.hpp"
#include "connlearn/errors.hpp"

using namespace connlearn;
using nlohmann::json;

namespace {

/// Training flags shared by pretrain and finetune; unset flags stay out of
/// the override object so the config file and defaults apply.
struct TrainFlags {
  std::optional<int> layers, heads, states, hidden, classifier_hidden, epochs, batch_size, finetune_epochs, te_bins,
      te_lag;
  std::optional<double> gamma, alpha, beta, tau, lr, weight_decay, finetune_lr, finetune_head_lr;
  std::optional<std::uint64_t> seed;
  bool no_standardize = false;
  bool fixed_learner = false;
  bool symmetric = false;
  bool no_normalize = false;

  void attach(CLI::App* app) {
    app->add_option("--L", layers, "Number of refinement iterations");
    app->add_option("--heads", heads, "Similarity heads per iteration");
    app->add_option("--states", states, "Encoder states");
    app->add_option("--hidden", hidden, "Hidden width of the encoder");
    app->add_option("--classifier-hidden", classifier_hidden, "Hidden width of the classifier");
    app->add_option("--epochs", epochs, "Pre-training epochs");
    app->add_option("--batch-size", batch_size, "Subjects per batch");
    app->add_option("--finetune-epochs", finetune_epochs, "Fine-tuning epochs per fold");
    app->add_option("--te-bins", te_bins, "Quantile bins of the transfer entropy estimator");
    app->add_option("--te-lag", te_lag, "Lag of the transfer entropy estimator");
    app->add_option("--gamma", gamma, "Frobenius weight inside the graph loss");
    app->add_option("--alpha", alpha, "Weight of the graph loss");
    app->add_option("--beta", beta, "Weight of the encoder regularizer");
    app->add_option("--tau", tau, "Contrastive temperature");
    app->add_option("--lr", lr, "Pre-training learning rate");
    app->add_option("--weight-decay", weight_decay, "Decoupled weight decay");
    app->add_option("--finetune-lr", finetune_lr, "Fine-tuning learning rate of the encoder");
    app->add_option("--finetune-head-lr", finetune_head_lr, "Fine-tuning learning rate of the classifier head");
    app->add_option("--seed", seed, "Random seed");
    app->add_flag("--no-standardize", no_standardize, "Skip per-region z-scoring");
    app->add_flag("--fixed-learner", fixed_learner, "Use the fused prior without learned similarity");
    app->add_flag("--symmetric-contrastive", symmetric, "Average both anchoring directions");
    app->add_flag("--no-contrastive-normalize", no_normalize, "Skip L2 normalization of embeddings");
  }

  json overrides() const {
    json o = json::object();
    auto put = [&](const char* key, const auto& v) {
      if (v) o[key] = *v;
    };
    put("L", layers);
    put("m", heads);
    put("c", states);
    put("hidden", hidden);
    put("classifier_hidden", classifier_hidden);
    put("epochs", epochs);
    put("batch_size", batch_size);
    put("finetune_epochs", finetune_epochs);
    put("te_bins", te_bins);
    put("te_lag", te_lag);
    put("gamma", gamma);
    put("alpha", alpha);
    put("beta", beta);
    put("tau", tau);
    put("lr", lr);
    put("weight_decay", weight_decay);
    put("finetune_lr", finetune_lr);
    put("finetune_head_lr", finetune_head_lr);
    put("seed", seed);
    if (no_standardize) o["standardize"] = false;
    if (fixed_learner) o["learner"] = json{{"adaptive", false}};
    if (symmetric) o["contrastive"]["symmetric"] = true;
    if (no_normalize) o["contrastive"]["normalize"] = false;
    return o;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive brain connectivity learning with contrastive pre-training"};
  app.require_subcommand(1);

  SynthCommand synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic VAR corpus");
  synth_cmd->add_option("--subjects", synth.synth.n_subjects, "Number of subjects")->capture_default_str();
  synth_cmd->add_option("--rois", synth.synth.n_regions, "Regions per subject")->capture_default_str();
  synth_cmd->add_option("--timepoints", synth.synth.n_timepoints, "Series length")->capture_default_str();
  synth_cmd->add_option("--classes", synth.synth.n_classes, "Number of classes")
      ->check(CLI::IsMember({1, 2}))
      ->capture_default_str();
  synth_cmd->add_option("--coupling", synth.synth.coupling_strength, "Coupling strength")->capture_default_str();
  synth_cmd->add_option("--noise", synth.synth.noise_std, "Innovation standard deviation")->capture_default_str();
  synth_cmd->add_option("--seed", synth.synth.seed, "Random seed")->capture_default_str();
  synth_cmd->add_option("--name", synth.synth.name, "Dataset name")->capture_default_str();
  synth_cmd->add_flag("--unlabeled", synth.unlabeled, "Omit labels from the manifest");
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();

  PretrainCommand pre;
  TrainFlags pre_flags;
  std::string pre_config, pre_cache;
  auto* pre_cmd = app.add_subcommand("pretrain", "Contrastive pre-training on unlabeled data");
  pre_cmd->add_option("--data", pre.data, "Dataset manifest")->required()->check(CLI::ExistingFile);
  pre_cmd->add_option("--config", pre_config, "JSON configuration file")->check(CLI::ExistingFile);
  pre_cmd->add_option("--out", pre.out, "Checkpoint directory")->required();
  pre_cmd->add_option("--prior-cache", pre_cache, "Directory caching transfer entropy priors");
  pre_cmd->add_flag("--log-timing", pre.log_timing, "Add wall time to each log line");
  pre_flags.attach(pre_cmd);

  FinetuneCommand fine;
  TrainFlags fine_flags;
  std::string fine_config, fine_ckpts, fine_cache;
  auto* fine_cmd = app.add_subcommand("finetune", "Supervised fine-tuning with cross-validation");
  fine_cmd->add_option("--data", fine.data, "Labeled dataset manifest")->required()->check(CLI::ExistingFile);
  fine_cmd->add_option("--ckpt", fine.ckpt, "Pretrained checkpoint directory")->required()->check(CLI::ExistingDirectory);
  fine_cmd->add_option("--folds", fine.folds, "Cross-validation folds")->capture_default_str()->check(CLI::Range(2, 1000));
  fine_cmd->add_option("--config", fine_config, "JSON configuration overriding the checkpoint's")->check(CLI::ExistingFile);
  fine_cmd->add_option("--out", fine.out, "Results JSON")->required();
  fine_cmd->add_option("--fold-ckpt-dir", fine_ckpts, "Directory receiving one checkpoint per fold");
  fine_cmd->add_option("--prior-cache", fine_cache, "Directory caching transfer entropy priors");
  fine_flags.attach(fine_cmd);

  ExportGraphCommand graph;
  std::string graph_view = "fc";
  auto* graph_cmd = app.add_subcommand("export-graph", "Write a learned connectivity matrix as CSV");
  graph_cmd->add_option("--ckpt", graph.ckpt, "Checkpoint directory")->required()->check(CLI::ExistingDirectory);
  graph_cmd->add_option("--data", graph.data, "Dataset manifest")->required()->check(CLI::ExistingFile);
  graph_cmd->add_option("--subject", graph.subject, "Subject id")->required();
  graph_cmd->add_option("--view", graph_view, "fc or ec")->check(CLI::IsMember({"fc", "ec"}))->capture_default_str();
  graph_cmd->add_option("--iteration", graph.iteration, "Iteration index 0..L")->capture_default_str();
  graph_cmd->add_option("--out", graph.out, "Output CSV")->required();

  ExportPriorCommand prior;
  std::string prior_kind = "pearson";
  bool prior_raw = false;
  auto* prior_cmd = app.add_subcommand("export-prior", "Write a subject's prior matrix as CSV");
  prior_cmd->add_option("--data", prior.data, "Dataset manifest")->required()->check(CLI::ExistingFile);
  prior_cmd->add_option("--subject", prior.subject, "Subject id")->required();
  prior_cmd->add_option("--kind", prior_kind, "pearson or te")->check(CLI::IsMember({"pearson", "te"}))->capture_default_str();
  prior_cmd->add_option("--bins", prior.bins, "Quantile bins")->capture_default_str();
  prior_cmd->add_option("--lag", prior.lag, "Lag")->capture_default_str();
  prior_cmd->add_flag("--raw", prior_raw, "Skip per-region z-scoring");
  prior_cmd->add_option("--out", prior.out, "Output CSV")->required();

  GradcheckCommand grad;
  std::string grad_out, grad_corrupt;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Compare analytic and numeric gradients");
  grad_cmd->add_option("--seed", grad.seed, "Random seed")->capture_default_str();
  grad_cmd->add_option("--scale", grad.scale, "desk or tiny")->capture_default_str();
  grad_cmd->add_option("--out", grad_out, "Report JSON");
  grad_cmd->add_option("--corrupt", grad_corrupt, "Perturb one parameter's analytic gradient")->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*synth_cmd) {
      cmd_synth(synth);
    } else if (*pre_cmd) {
      if (!pre_config.empty()) pre.config = pre_config;
      if (!pre_cache.empty()) pre.prior_cache = pre_cache;
      pre.overrides = pre_flags.overrides();
      cmd_pretrain(pre);
    } else if (*fine_cmd) {
      if (!fine_config.empty()) fine.config = fine_config;
      if (!fine_ckpts.empty()) fine.fold_checkpoints = fine_ckpts;
      if (!fine_cache.empty()) fine.prior_cache = fine_cache;
      fine.overrides = fine_flags.overrides();
      const json results = cmd_finetune(fine);
      std::cerr << "aggregate: " << results["aggregate"].dump() << "\n";
    } else if (*graph_cmd) {
      graph.view = graph_view == "fc" ? View::fc : View::ec;
      cmd_export_graph(graph);
    } else if (*prior_cmd) {
      prior.kind = prior_kind == "pearson" ? PriorKind::pearson : PriorKind::transfer_entropy;
      prior.standardize = !prior_raw;
      cmd_export_prior(prior);
    } else if (*grad_cmd) {
      if (!grad_out.empty()) grad.out = grad_out;
      if (!grad_corrupt.empty()) grad.corrupt_param = grad_corrupt;
      const json report = cmd_gradcheck(grad);
      for (const auto& o : report["objectives"]) {
        std::cerr << o["objective"].get<std::string>() << ": max_rel_error=" << o["max_rel_error"].dump()
                  << (o["pass"].get<bool>() ? " ok" : " FAIL") << "\n";
        for (const auto& p : o["params"]) {
          if (!p["pass"].get<bool>()) {
            std::cerr << "  " << p["param"].get<std::string>() << ": max_rel_error=" << p["max_rel_error"].dump()
                      << "\n";
          }
        }
      }
      return report["pass"].get<bool>() ? 0 : 1;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
