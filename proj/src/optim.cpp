#include "connlearn/optim.hpp"

#include <cmath>
#include <numeric>

#include "connlearn/errors.hpp"
#include "connlearn/rng.hpp"

namespace connlearn {

using nlohmann::json;

void adam_step(ModelT<Matrix>& params, const Gradients& grads, AdamState& state, double lr,
               double weight_decay) {
  adam_step(params, grads, state, [lr](const std::string&) { return lr; }, weight_decay);
}

void adam_step(ModelT<Matrix>& params, const Gradients& grads, AdamState& state,
               const std::function<double(const std::string&)>& lr_of, double weight_decay) {
  std::vector<Matrix*> p;
  std::vector<const Matrix*> g;
  std::vector<std::string> names;
  for_each_param(params, [&](const std::string& name, Matrix& m) {
    p.push_back(&m);
    names.push_back(name);
  });
  for_each_param(grads, [&](const std::string&, const Matrix& m) { g.push_back(&m); });
  if (p.size() != g.size()) throw ContractError("adam_step: gradient tree does not match parameters");
  if (state.first.empty()) {
    state.first.resize(p.size());
    state.second.resize(p.size());
  }
  if (state.first.size() != p.size()) throw ContractError("adam_step: optimizer state does not match parameters");

  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (g[k]->size() == 0) continue;
    Matrix& param = *p[k];
    const Matrix& grad = *g[k];
    if (grad.rows() != param.rows() || grad.cols() != param.cols()) {
      throw ContractError("adam_step: gradient shape differs from parameter");
    }
    Matrix& m = state.first[k];
    Matrix& v = state.second[k];
    if (m.size() == 0) {
      m = Matrix::Zero(param.rows(), param.cols());
      v = Matrix::Zero(param.rows(), param.cols());
    }
    const double lr = lr_of(names[k]);
    m = state.beta1 * m + (1.0 - state.beta1) * grad;
    v = state.beta2 * v + (1.0 - state.beta2) * grad.cwiseProduct(grad);
    if (weight_decay != 0.0) param *= (1.0 - lr * weight_decay);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.eps);
  }
}

const char* objective_name(Objective o) {
  switch (o) {
    case Objective::pretrain: return "pretrain_total";
    case Objective::finetune: return "finetune_total";
    case Objective::contrastive: return "contrastive";
    case Objective::graph: return "graph";
    case Objective::encoder_reg: return "encoder_reg";
    case Objective::classification: return "classification";
  }
  return "unknown";
}

Trainable objective_trainable(Objective o) {
  switch (o) {
    case Objective::pretrain:
    case Objective::contrastive:
    case Objective::graph:
    case Objective::encoder_reg: return Trainable::pretraining();
    case Objective::finetune: return Trainable::finetuning();
    case Objective::classification: return Trainable{true, true, true};
  }
  return Trainable::none();
}

namespace {

struct Recorded {
  ad::Var loss;
  LossReport report;
};

Recorded record_objective(ad::Tape& tape, const ModelT<ad::Var>& vars, const Model& model,
                          std::span<const PreparedSubject* const> batch, const TrainConfig& config,
                          Objective objective) {
  if (batch.empty()) throw ContractError("empty batch");
  std::vector<SubjectTrace> traces;
  traces.reserve(batch.size());
  for (const PreparedSubject* s : batch) {
    traces.push_back(forward_subject(tape, vars, *s, model.shape.layers, config.adaptive_learner));
  }
#ifndef NDEBUG
  for (const auto& t : traces) {
    for (const auto& vt : t.views) {
      for (const auto& a : vt.adjacency) {
        const Matrix& m = a.value();
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
          const double row = m.row(i).sum();
          if ((m.row(i).array() < 0.0).any() || m(i, i) != 0.0 ||
              !(row == 0.0 || std::abs(row - 1.0) <= 1e-9)) {
            throw ContractError("learned graph violates row-stochasticity");
          }
        }
      }
    }
  }
#endif

  auto logits_and_labels = [&](std::vector<ad::Var>& logits, std::vector<int>& labels) {
    for (std::size_t i = 0; i < traces.size(); ++i) {
      if (!batch[i]->label) throw SchemaError("subject '" + batch[i]->id + "' has no label");
      logits.push_back(classify_head(traces[i].view(View::fc).last().pooled,
                                     traces[i].view(View::ec).last().pooled, vars.head));
      labels.push_back(*batch[i]->label);
    }
  };

  switch (objective) {
    case Objective::pretrain: {
      const BatchLoss b = total_pretrain_loss(traces, config);
      return {b.total, b.report};
    }
    case Objective::finetune: {
      std::vector<ad::Var> logits;
      std::vector<int> labels;
      logits_and_labels(logits, labels);
      const BatchLoss b = total_finetune_loss(traces, logits, labels, config);
      return {b.total, b.report};
    }
    case Objective::contrastive: {
      TrainConfig c = config;
      c.alpha = 0.0;
      c.beta = 0.0;
      const BatchLoss b = total_pretrain_loss(traces, c);
      return {b.total, b.report};
    }
    case Objective::graph: {
      ad::Var total = tape.constant(Matrix::Zero(1, 1));
      for (const auto& t : traces) {
        for (View v : kViews) {
          total = ad::add(total, graph_loss(t.view(v).last().node, t.view(v).adjacency.back(), config.gamma));
        }
      }
      total = ad::scale(total, 1.0 / static_cast<double>(traces.size()));
      LossReport r;
      r.total = total.scalar();
      return {total, r};
    }
    case Objective::encoder_reg: {
      ad::Var total = tape.constant(Matrix::Zero(1, 1));
      for (const auto& t : traces) {
        for (View v : kViews) total = ad::add(total, encoder_loss(t.view(v).last().state_pooled));
      }
      total = ad::scale(total, 1.0 / static_cast<double>(traces.size()));
      LossReport r;
      r.encoder_reg = total.scalar();
      r.total = r.encoder_reg;
      return {total, r};
    }
    case Objective::classification: {
      std::vector<ad::Var> logits;
      std::vector<int> labels;
      logits_and_labels(logits, labels);
      TrainConfig c = config;
      c.beta = 0.0;
      const BatchLoss b = total_finetune_loss(traces, logits, labels, c);
      return {b.total, b.report};
    }
  }
  throw ContractError("unknown objective");
}

}  // namespace

BatchGradients compute_gradients(const Model& model, std::span<const PreparedSubject* const> batch,
                                 const TrainConfig& config, Objective objective) {
  ad::Tape tape;
  const Trainable trainable = objective_trainable(objective);
  const ModelT<ad::Var> vars = bind_params(tape, model.params, trainable);
  const Recorded rec = record_objective(tape, vars, model, batch, config, objective);
  tape.backward(rec.loss);

  BatchGradients out;
  out.report = rec.report;
  out.loss = rec.loss.scalar();
  out.grads = map_params<Matrix>(vars, [&](const std::string& name, const ad::Var& v) -> Matrix {
    if (!trainable.contains(name)) return Matrix();
    const Matrix& g = v.grad();
    // A trainable parameter the loss does not reach has gradient zero.
    Matrix grad = g.size() == 0 ? Matrix::Zero(v.rows(), v.cols()) : g;
    if (!grad.allFinite()) throw NonFiniteGradientError(name);
    return grad;
  });
  return out;
}

double evaluate_objective(const Model& model, std::span<const PreparedSubject* const> batch,
                          const TrainConfig& config, Objective objective) {
  ad::Tape tape;
  const ModelT<ad::Var> vars = bind_params(tape, model.params, Trainable::none());
  return record_objective(tape, vars, model, batch, config, objective).loss.scalar();
}

json GradcheckReport::to_json() const {
  json params = json::array();
  double worst = 0.0;
  for (const auto& e : entries) {
    worst = std::max(worst, e.max_rel_error);
    params.push_back(json{{"param", e.param},
                          {"entries", e.entries},
                          {"max_rel_error", e.max_rel_error},
                          {"max_abs_error", e.max_abs_error},
                          {"pass", e.pass}});
  }
  return json{{"objective", objective}, {"step", step}, {"tolerance", tolerance}, {"pass", pass},
              {"max_rel_error", worst}, {"params", std::move(params)}};
}

GradcheckReport gradcheck(const Model& model, std::span<const PreparedSubject* const> batch,
                          const TrainConfig& config, Objective objective, const GradcheckOptions& options) {
  const BatchGradients analytic = compute_gradients(model, batch, config, objective);
  const Trainable trainable = objective_trainable(objective);

  GradcheckReport report;
  report.objective = objective_name(objective);
  report.step = options.step;
  report.tolerance = options.tolerance;

  Model probe = model;
  std::vector<std::pair<std::string, Matrix*>> slots;
  for_each_param(probe.params, [&](const std::string& name, Matrix& m) { slots.emplace_back(name, &m); });
  std::vector<const Matrix*> grads;
  for_each_param(analytic.grads, [&](const std::string&, const Matrix& m) { grads.push_back(&m); });

  for (std::size_t k = 0; k < slots.size(); ++k) {
    const auto& [name, param] = slots[k];
    if (!trainable.contains(name)) continue;
    Matrix grad = *grads[k];
    if (options.corrupt_param && *options.corrupt_param == name) grad.array() += 1e-3;
    GradcheckEntry entry;
    entry.param = name;
    entry.entries = static_cast<std::size_t>(param->size());
    for (Eigen::Index i = 0; i < param->rows(); ++i) {
      for (Eigen::Index j = 0; j < param->cols(); ++j) {
        const double saved = (*param)(i, j);
        (*param)(i, j) = saved + options.step;
        const double up = evaluate_objective(probe, batch, config, objective);
        (*param)(i, j) = saved - options.step;
        const double down = evaluate_objective(probe, batch, config, objective);
        (*param)(i, j) = saved;
        const double numeric = (up - down) / (2.0 * options.step);
        const double abs_err = std::abs(grad(i, j) - numeric);
        const double denom = std::max({std::abs(grad(i, j)), std::abs(numeric), options.scale_floor});
        entry.max_abs_error = std::max(entry.max_abs_error, abs_err);
        entry.max_rel_error = std::max(entry.max_rel_error, abs_err / denom);
      }
    }
    entry.pass = entry.max_rel_error < options.tolerance;
    report.pass = report.pass && entry.pass;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

std::vector<GradcheckReport> gradcheck_suite(std::uint64_t seed, const DeskScale& scale,
                                             const GradcheckOptions& options) {
  TrainConfig config;
  config.layers = scale.layers;
  config.heads = scale.heads;
  config.states = scale.states;
  config.hidden = scale.hidden;
  config.classifier_hidden = scale.classifier_hidden;
  config.te_bins = 3;
  config.seed = seed;
  // Loss weights large enough that every term shapes the total's gradient.
  config.alpha = 0.1;
  config.beta = 0.5;

  SynthOptions synth;
  synth.n_subjects = scale.batch;
  synth.n_regions = scale.regions;
  synth.n_timepoints = scale.timepoints;
  synth.n_classes = 2;
  synth.seed = derive_seed(seed, 3);
  const Dataset ds = synth_generate(synth);
  PriorCache cache;
  const std::vector<PreparedSubject> subjects = prepare_subjects(ds, config, cache);
  std::vector<const PreparedSubject*> batch;
  for (const auto& s : subjects) batch.push_back(&s);

  Model model = init_model(config.shape(scale.timepoints), seed);
  // Move away from the all-ones learner start so heads differ clearly.
  Rng rng(derive_seed(seed, 4));
  for_each_param(model.params, [&](const std::string& name, Matrix& m) {
    if (param_group(name) == ParamGroup::learner) {
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] += 0.3 * rng.normal();
    } else if (param_group(name) == ParamGroup::encoder && m.rows() == 1) {
      m.array() += 0.1;
    }
  });

  std::vector<GradcheckReport> reports;
  for (Objective o : {Objective::pretrain, Objective::finetune, Objective::contrastive, Objective::graph,
                      Objective::encoder_reg, Objective::classification}) {
    reports.push_back(gradcheck(model, batch, config, o, options));
  }
  return reports;
}

json EpochLog::to_json() const {
  json j{{"epoch", epoch}, {"loss", report.to_json()}};
  if (wall_time_s) j["wall_time_s"] = *wall_time_s;
  return j;
}

namespace {

std::vector<std::vector<std::size_t>> make_batches(std::vector<std::size_t> order, int batch_size, Rng& rng) {
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

void accumulate(LossReport& acc, const LossReport& r, double weight) {
  acc.contrastive += weight * r.contrastive;
  acc.graph_fc += weight * r.graph_fc;
  acc.graph_ec += weight * r.graph_ec;
  acc.encoder_reg += weight * r.encoder_reg;
  acc.classification += weight * r.classification;
  acc.total += weight * r.total;
  acc.alpha = r.alpha;
  acc.beta = r.beta;
  acc.gamma = r.gamma;
  acc.tau = r.tau;
}

// Trains in place; returns one log record per epoch.
std::vector<EpochLog> train_loop(Model& model, std::span<const PreparedSubject> subjects,
                                 std::vector<std::size_t> indices, const TrainConfig& config, Objective objective,
                                 int epochs, const std::function<double(const std::string&)>& lr_of,
                                 std::uint64_t shuffle_seed, const TrainOptions& options) {
  AdamState state;
  Rng rng(shuffle_seed);
  std::vector<EpochLog> log;
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    LossReport mean;
    for (const auto& batch_idx : make_batches(indices, config.batch_size, rng)) {
      std::vector<const PreparedSubject*> batch;
      for (std::size_t i : batch_idx) batch.push_back(&subjects[i]);
      const BatchGradients g = compute_gradients(model, batch, config, objective);
      accumulate(mean, g.report, static_cast<double>(batch.size()) / static_cast<double>(indices.size()));
      adam_step(model.params, g.grads, state, lr_of, config.weight_decay);
    }
    EpochLog entry{epoch, mean, std::nullopt};
    if (options.log_wall_time) {
      entry.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    if (options.on_epoch) options.on_epoch(entry);
    log.push_back(entry);
  }
  return log;
}

int common_timepoints(std::span<const PreparedSubject> subjects) {
  const auto t = subjects.front().features.cols();
  for (const auto& s : subjects) {
    if (s.features.cols() != t) {
      throw SchemaError("subject '" + s.id + "' has " + std::to_string(s.features.cols()) +
                        " time points; training needs a common length of " + std::to_string(t));
    }
  }
  return static_cast<int>(t);
}

}  // namespace

PretrainResult pretrain(std::span<const PreparedSubject> subjects, const TrainConfig& config,
                        const TrainOptions& options) {
  config.validate();
  if (subjects.empty()) throw ConfigError("pretraining dataset is empty");
  PretrainResult result;
  result.model = init_model(config.shape(common_timepoints(subjects)), config.seed);
  std::vector<std::size_t> all(subjects.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  result.log = train_loop(result.model, subjects, all, config, Objective::pretrain, config.epochs,
                          [&](const std::string&) { return config.lr; }, derive_seed(config.seed, 10), options);
  return result;
}

FinetuneResult finetune(std::span<const PreparedSubject> subjects, const Model& pretrained,
                        const TrainConfig& config, int folds, const TrainOptions& options) {
  config.validate();
  if (subjects.empty()) throw ConfigError("fine-tuning dataset is empty");
  const int t = common_timepoints(subjects);
  if (t != pretrained.shape.timepoints) {
    throw ConfigError("dataset has " + std::to_string(t) + " time points but the checkpoint expects " +
                      std::to_string(pretrained.shape.timepoints));
  }
  const ModelShape expected = config.shape(t);
  if (!(expected == pretrained.shape)) {
    throw ConfigError("checkpoint structure (L, m, c, hidden) does not match the configuration");
  }
  std::vector<int> labels;
  for (const auto& s : subjects) {
    if (!s.label || (*s.label != 0 && *s.label != 1)) {
      throw SchemaError("subject '" + s.id + "' has no label in {0,1}");
    }
    labels.push_back(*s.label);
  }
  if (std::find(labels.begin(), labels.end(), 0) == labels.end() ||
      std::find(labels.begin(), labels.end(), 1) == labels.end()) {
    throw SchemaError("fine-tuning labels must contain both classes 0 and 1");
  }
  const std::vector<Fold> splits = stratified_kfold(labels, folds, derive_seed(config.seed, 20));
  const auto finetune_lr = [&](const std::string& name) {
    return param_group(name) == ParamGroup::head ? config.finetune_head_lr : config.finetune_lr;
  };

  FinetuneResult result;
  result.learner_digest_before = learner_digest(pretrained.params);
  std::vector<MetricsReport> metrics;
  for (std::size_t f = 0; f < splits.size(); ++f) {
    FoldResult fold;
    fold.fold = static_cast<int>(f);
    fold.fitted = pretrained;
    fold.fitted.params.head = init_head(pretrained.shape, derive_seed(config.seed, 100 + f));
    fold.log = train_loop(fold.fitted, subjects, splits[f].train, config, Objective::finetune,
                          config.finetune_epochs, finetune_lr, derive_seed(config.seed, 200 + f), options);

    std::vector<int> preds, truth;
    std::vector<double> scores;
    for (std::size_t i : splits[f].test) {
      const SubjectInference inf = infer_subject(fold.fitted, subjects[i], config.adaptive_learner);
      const RowVector& z = inf.logits;
      preds.push_back(predicted_class(z));
      // Probability of class 1.
      scores.push_back(1.0 / (1.0 + std::exp(z(0) - z(1))));
      truth.push_back(labels[i]);
      fold.test_ids.push_back(subjects[i].id);
    }
    for (std::size_t i : splits[f].train) fold.train_ids.push_back(subjects[i].id);
    fold.metrics = confusion_metrics(preds, truth);
    try {
      fold.metrics.auc = auc(scores, truth);
    } catch (const UndefinedMetricError&) {
    }
    if (learner_digest(fold.fitted.params) != result.learner_digest_before) {
      throw ContractError("learner parameters changed during fine-tuning");
    }
    metrics.push_back(fold.metrics);
    result.folds.push_back(std::move(fold));
  }
  result.learner_digest_after =
      result.folds.empty() ? result.learner_digest_before : learner_digest(result.folds.back().fitted.params);
  result.aggregate = aggregate(metrics);
  return result;
}

}  // namespace connlearn
