#include "connlearn/pipeline.hpp"

#include "connlearn/errors.hpp"

namespace connlearn {

std::vector<PreparedSubject> prepare_subjects(const Dataset& dataset, const TrainConfig& config,
                                              PriorCache& cache) {
  std::vector<PreparedSubject> out;
  out.reserve(dataset.subjects.size());
  for (const auto& s : dataset.subjects) {
    PreparedSubject p;
    p.id = s.subject_id;
    p.label = s.label;
    if (config.standardize) {
      ZScoreResult z = zscore_rows(s.bold);
      p.features = std::move(z.bold.values);
      p.constant_rows = std::move(z.constant_rows);
    } else {
      p.features = s.bold.values;
    }
    p.priors = cache.get(p.features, config.te_bins, config.te_lag);
    out.push_back(std::move(p));
  }
  return out;
}

ParamGroup param_group(const std::string& name) {
  if (name.find(".learner.") != std::string::npos) return ParamGroup::learner;
  if (name.find(".encoder.") != std::string::npos) return ParamGroup::encoder;
  if (name.rfind("head.", 0) == 0) return ParamGroup::head;
  throw ContractError("unknown parameter '" + name + "'");
}

bool Trainable::contains(const std::string& name) const {
  switch (param_group(name)) {
    case ParamGroup::learner: return learner;
    case ParamGroup::encoder: return encoder;
    case ParamGroup::head: return head;
  }
  return false;
}

ModelT<ad::Var> bind_params(ad::Tape& tape, const ModelT<Matrix>& params, const Trainable& trainable) {
  return map_params<ad::Var>(params, [&](const std::string& name, const Matrix& m) {
    return trainable.contains(name) ? tape.leaf(m) : tape.constant(m);
  });
}

SubjectTrace forward_subject(ad::Tape& tape, const ModelT<ad::Var>& params, const PreparedSubject& subject,
                             int layers, bool adaptive) {
  SubjectTrace trace;
  const ad::Var input = tape.constant(subject.features);
  for (View v : kViews) {
    const auto vi = view_index(v);
    const Matrix& prior = subject.prior(v).values;
    ViewTrace& vt = trace.views[vi];
    std::optional<FusedGraph> fixed;
    if (!adaptive) {
      fixed = fuse_normalize(tape.constant(Matrix::Ones(prior.rows(), prior.cols())), prior);
    }
    ad::Var features = input;
    for (int l = 0; l <= layers; ++l) {
      const FusedGraph g =
          adaptive ? build_connectivity(features, params.learner[vi].weights.at(static_cast<std::size_t>(l)), prior)
                   : *fixed;
      vt.raw.push_back(g.raw);
      vt.adjacency.push_back(g.adjacency);
      vt.hidden.push_back(multi_state_forward(g.adjacency, features, params.encoder[vi], l));
      features = vt.hidden.back().node;
    }
  }
  return trace;
}

ContrastiveOptions contrastive_options(const TrainConfig& config) {
  return ContrastiveOptions{config.tau, config.contrastive_normalize, config.contrastive_symmetric};
}

namespace {

struct Regularizers {
  ad::Var graph_fc, graph_ec, encoder_reg;
};

Regularizers batch_regularizers(ad::Tape& tape, std::span<const SubjectTrace> traces, double gamma,
                                bool with_graph) {
  const double inv = 1.0 / static_cast<double>(traces.size());
  ad::Var gf = tape.constant(Matrix::Zero(1, 1));
  ad::Var ge = gf;
  ad::Var er = gf;
  for (const auto& t : traces) {
    if (with_graph) {
      const ViewTrace& f = t.view(View::fc);
      const ViewTrace& e = t.view(View::ec);
      gf = ad::add(gf, graph_loss(f.last().node, f.adjacency.back(), gamma));
      ge = ad::add(ge, graph_loss(e.last().node, e.adjacency.back(), gamma));
    }
    for (View v : kViews) er = ad::add(er, encoder_loss(t.view(v).last().state_pooled));
  }
  return Regularizers{ad::scale(gf, inv), ad::scale(ge, inv), ad::scale(er, inv)};
}

}  // namespace

BatchLoss total_pretrain_loss(std::span<const SubjectTrace> traces, const TrainConfig& config) {
  if (traces.empty()) throw ContractError("empty batch");
  ad::Tape& tape = *traces.front().view(View::fc).last().pooled.tape();
  std::vector<ad::Var> fc, ec;
  for (const auto& t : traces) {
    fc.push_back(t.view(View::fc).last().pooled);
    ec.push_back(t.view(View::ec).last().pooled);
  }
  const ad::Var contrastive = nt_xent(fc, ec, contrastive_options(config));
  const Regularizers reg = batch_regularizers(tape, traces, config.gamma, true);
  ad::Var total = ad::add(contrastive, ad::scale(ad::add(reg.graph_fc, reg.graph_ec), config.alpha));
  total = ad::add(total, ad::scale(reg.encoder_reg, config.beta));

  LossReport r;
  r.contrastive = contrastive.scalar();
  r.graph_fc = reg.graph_fc.scalar();
  r.graph_ec = reg.graph_ec.scalar();
  r.encoder_reg = reg.encoder_reg.scalar();
  r.total = total.scalar();
  r.alpha = config.alpha;
  r.beta = config.beta;
  r.gamma = config.gamma;
  r.tau = config.tau;
  return BatchLoss{total, r};
}

BatchLoss total_finetune_loss(std::span<const SubjectTrace> traces, std::span<const ad::Var> logits,
                              std::span<const int> labels, const TrainConfig& config) {
  if (traces.empty() || traces.size() != logits.size() || logits.size() != labels.size()) {
    throw ContractError("fine-tune batch sizes disagree");
  }
  ad::Tape& tape = *logits.front().tape();
  ad::Var ce = tape.constant(Matrix::Zero(1, 1));
  for (std::size_t i = 0; i < logits.size(); ++i) ce = ad::add(ce, cross_entropy(logits[i], labels[i]));
  ce = ad::scale(ce, 1.0 / static_cast<double>(logits.size()));
  const Regularizers reg = batch_regularizers(tape, traces, config.gamma, false);
  const ad::Var total = ad::add(ce, ad::scale(reg.encoder_reg, config.beta));

  LossReport r;
  r.classification = ce.scalar();
  r.encoder_reg = reg.encoder_reg.scalar();
  r.total = total.scalar();
  r.alpha = config.alpha;
  r.beta = config.beta;
  r.gamma = config.gamma;
  r.tau = config.tau;
  return BatchLoss{total, r};
}

SubjectInference infer_subject(const Model& model, const PreparedSubject& subject, bool adaptive) {
  ad::Tape tape;
  const ModelT<ad::Var> vars = bind_params(tape, model.params, Trainable::none());
  const SubjectTrace trace = forward_subject(tape, vars, subject, model.shape.layers, adaptive);
  SubjectInference out;
  for (View v : kViews) {
    const auto vi = view_index(v);
    const ViewTrace& vt = trace.views[vi];
    for (std::size_t l = 0; l < vt.adjacency.size(); ++l) {
      const Matrix& raw = vt.raw[l].value();
      std::size_t isolated = 0;
      for (Eigen::Index i = 0; i < raw.rows(); ++i) {
        if ((raw.row(i).array() == 0.0).all()) ++isolated;
      }
      out.graphs[vi].push_back(ConnectivityMatrix{vt.adjacency[l].value(), v, static_cast<int>(l), isolated});
      out.raw[vi].push_back(raw);
    }
    out.pooled[vi] = vt.last().pooled.value().row(0);
  }
  out.logits = classify_head(trace.view(View::fc).last().pooled, trace.view(View::ec).last().pooled,
                             vars.head)
                   .value()
                   .row(0);
  return out;
}

}  // namespace connlearn
