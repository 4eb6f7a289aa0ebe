#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "connlearn/commands.hpp"
#include "connlearn/encoder.hpp"
#include "connlearn/eval.hpp"
#include "connlearn/learner.hpp"
#include "connlearn/losses.hpp"
#include "connlearn/priors.hpp"
#include "connlearn/signals.hpp"

namespace py = pybind11;
using namespace connlearn;
using nlohmann::json;

namespace {

py::object to_python(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

json from_python(const py::object& o) {
  if (o.is_none()) return json::object();
  return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

std::vector<RowVector> rows_of(const Matrix& m) {
  std::vector<RowVector> out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.emplace_back(m.row(i));
  return out;
}

PriorMatrix pearson_prior(const Matrix& values) {
  PriorMatrix p;
  p.values = values;
  p.kind = PriorKind::pearson;
  return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Adaptive brain connectivity learning: core operations";

  py::register_exception<Error>(m, "Error");
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
  py::register_exception<LookupError>(m, "LookupError", PyExc_KeyError);

  m.def(
      "zscore_rows",
      [](const Matrix& x) { return zscore_rows(BoldMatrix::from_values(x)).bold.values; }, py::arg("series"),
      "Standardizes each region to mean 0 and population variance 1.");
  m.def(
      "coupling_template", &coupling_template, py::arg("n_regions"), py::arg("class_index"),
      "Directed coupling template of a synthetic class; entry (i, j) weighs the edge j -> i.");
  m.def(
      "pearson_matrix", [](const Matrix& x) { return pearson_matrix(x).values; }, py::arg("series"));
  m.def(
      "transfer_entropy_matrix",
      [](const Matrix& x, int bins, int lag) { return transfer_entropy_matrix(x, bins, lag).values; },
      py::arg("series"), py::arg("bins") = 8, py::arg("lag") = 1,
      "Entry (i, j) is the transfer entropy from region j to region i, in bits.");
  m.def(
      "quantile_bins", [](const std::vector<double>& x, int bins) { return quantile_bins(x, bins); },
      py::arg("series"), py::arg("bins"));

  m.def(
      "multihead_similarity",
      [](const Matrix& features, const std::vector<Matrix>& heads) { return multihead_similarity(features, heads); },
      py::arg("features"), py::arg("head_weights"));
  m.def(
      "fuse_raw", [](const Matrix& s, const Matrix& prior) { return fuse_raw(s, pearson_prior(prior)); },
      py::arg("similarity"), py::arg("prior"));
  m.def(
      "fuse_normalize",
      [](const Matrix& s, const Matrix& prior) { return fuse_normalize(s, pearson_prior(prior)).values; },
      py::arg("similarity"), py::arg("prior"));
  m.def(
      "normalize_adjacency", [](const Matrix& a) { return normalize_adjacency(a); }, py::arg("adjacency"));

  m.def(
      "nt_xent",
      [](const Matrix& fc, const Matrix& ec, double tau, bool normalize, bool symmetric) {
        ContrastiveOptions o;
        o.tau = tau;
        o.normalize = normalize;
        o.symmetric = symmetric;
        return nt_xent(rows_of(fc), rows_of(ec), o);
      },
      py::arg("fc"), py::arg("ec"), py::arg("tau") = 0.5, py::arg("normalize") = true, py::arg("symmetric") = false,
      "Contrastive loss over a batch; row i of fc and ec embed the same subject.");
  m.def(
      "graph_loss", [](const Matrix& h, const Matrix& a, double gamma) { return graph_loss(h, a, gamma); },
      py::arg("node_features"), py::arg("adjacency"), py::arg("gamma") = 0.01);
  m.def(
      "cross_entropy", [](const RowVector& logits, int label) { return cross_entropy(logits, label); },
      py::arg("logits"), py::arg("label"));

  m.def(
      "confusion_metrics",
      [](const std::vector<int>& predictions, const std::vector<int>& labels) {
        return to_python(confusion_metrics(predictions, labels).to_json());
      },
      py::arg("predictions"), py::arg("labels"));
  m.def(
      "auc", [](const std::vector<double>& scores, const std::vector<int>& labels) { return auc(scores, labels); },
      py::arg("scores"), py::arg("labels"));
  m.def(
      "stratified_kfold",
      [](const std::vector<int>& labels, int k, std::uint64_t seed) {
        std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> out;
        for (const Fold& f : stratified_kfold(labels, k, seed)) out.emplace_back(f.train, f.test);
        return out;
      },
      py::arg("labels"), py::arg("k") = 5, py::arg("seed") = 0);

  m.def(
      "synth",
      [](const std::filesystem::path& out, int subjects, int regions, int timepoints, int classes, double coupling,
         double noise, std::uint64_t seed, bool unlabeled) {
        SynthCommand c;
        c.synth.n_subjects = subjects;
        c.synth.n_regions = regions;
        c.synth.n_timepoints = timepoints;
        c.synth.n_classes = classes;
        c.synth.coupling_strength = coupling;
        c.synth.noise_std = noise;
        c.synth.seed = seed;
        c.unlabeled = unlabeled;
        c.out = out;
        cmd_synth(c);
      },
      py::arg("out"), py::arg("subjects") = 60, py::arg("regions") = 16, py::arg("timepoints") = 200,
      py::arg("classes") = 2, py::arg("coupling") = 0.6, py::arg("noise") = 1.0, py::arg("seed") = 0,
      py::arg("unlabeled") = false);
  m.def(
      "pretrain",
      [](const std::filesystem::path& data, const std::filesystem::path& out, const py::object& config) {
        PretrainCommand c;
        c.data = data;
        c.out = out;
        c.overrides = from_python(config);
        return to_python(cmd_pretrain(c).to_json());
      },
      py::arg("data"), py::arg("out"), py::arg("config") = py::none(),
      "Pretrains and writes a checkpoint directory; returns the merged configuration.");
  m.def(
      "finetune",
      [](const std::filesystem::path& data, const std::filesystem::path& ckpt, const std::filesystem::path& out,
         int folds, const py::object& config) {
        FinetuneCommand c;
        c.data = data;
        c.ckpt = ckpt;
        c.out = out;
        c.folds = folds;
        c.overrides = from_python(config);
        return to_python(cmd_finetune(c));
      },
      py::arg("data"), py::arg("ckpt"), py::arg("out"), py::arg("folds") = 5, py::arg("config") = py::none(),
      "Cross-validated fine-tuning; returns the results document also written to out.");
  m.def(
      "gradcheck",
      [](std::uint64_t seed, const std::string& scale) {
        GradcheckCommand c;
        c.seed = seed;
        c.scale = scale;
        return to_python(cmd_gradcheck(c));
      },
      py::arg("seed") = 0, py::arg("scale") = "desk");
}
