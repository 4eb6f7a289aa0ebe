#include "connlearn/signals.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "connlearn/errors.hpp"
#include "connlearn/io.hpp"
#include "connlearn/rng.hpp"

namespace connlearn {

namespace fs = std::filesystem;
using nlohmann::json;

BoldMatrix BoldMatrix::from_values(Matrix values) {
  BoldMatrix bold;
  bold.region_ids.reserve(static_cast<std::size_t>(values.rows()));
  for (Eigen::Index i = 0; i < values.rows(); ++i) bold.region_ids.push_back("r" + std::to_string(i));
  bold.values = std::move(values);
  bold.validate();
  return bold;
}

void BoldMatrix::validate() const {
  if (values.rows() < 2) throw SchemaError("time series needs at least 2 regions");
  if (values.cols() < 8) throw SchemaError("time series needs at least 8 time points");
  if (static_cast<Eigen::Index>(region_ids.size()) != values.rows()) {
    throw SchemaError("region id count does not match row count");
  }
  if (!values.allFinite()) throw SchemaError("time series contains non-finite values");
}

ZScoreResult zscore_rows(const BoldMatrix& bold) {
  ZScoreResult result{bold, {}};
  Matrix& x = result.bold.values;
  const double t = static_cast<double>(x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mean = x.row(i).sum() / t;
    const double var = (x.row(i).array() - mean).square().sum() / t;
    if (!(var > 0.0)) {
      x.row(i).setZero();
      result.constant_rows.push_back(i);
      continue;
    }
    x.row(i) = (x.row(i).array() - mean) / std::sqrt(var);
  }
  return result;
}

std::optional<Eigen::Index> Dataset::uniform_timepoints() const {
  if (subjects.empty()) return std::nullopt;
  const Eigen::Index t = subjects.front().bold.timepoints();
  for (const auto& s : subjects) {
    if (s.bold.timepoints() != t) return std::nullopt;
  }
  return t;
}

const SubjectRecord& Dataset::find(const std::string& subject_id) const {
  for (const auto& s : subjects) {
    if (s.subject_id == subject_id) return s;
  }
  throw LookupError("unknown subject id '" + subject_id + "'");
}

std::vector<int> Dataset::labels() const {
  std::vector<int> out;
  out.reserve(subjects.size());
  for (const auto& s : subjects) {
    if (!s.label) throw SchemaError("subject '" + s.subject_id + "' has no label");
    out.push_back(*s.label);
  }
  return out;
}

void Dataset::validate() const {
  std::set<std::string> seen;
  for (const auto& s : subjects) {
    if (!seen.insert(s.subject_id).second) {
      throw SchemaError("duplicate subject id '" + s.subject_id + "'");
    }
    if (s.bold.regions() != n_regions) {
      throw SchemaError("subject '" + s.subject_id + "' has " + std::to_string(s.bold.regions()) +
                        " regions, expected " + std::to_string(n_regions));
    }
    if (s.label && *s.label != 0 && *s.label != 1) {
      throw SchemaError("subject '" + s.subject_id + "' has label outside {0,1}");
    }
    if (labeled && !s.label) throw SchemaError("subject '" + s.subject_id + "' has no label");
  }
}

Matrix read_csv_matrix(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      ++row;
      continue;
    }
    std::vector<double> cells;
    std::size_t column = 0;
    std::size_t start = 0;
    while (start <= line.size()) {
      std::size_t end = line.find(',', start);
      if (end == std::string::npos) end = line.size();
      std::string_view cell(line.data() + start, end - start);
      while (!cell.empty() && cell.front() == ' ') cell.remove_prefix(1);
      while (!cell.empty() && cell.back() == ' ') cell.remove_suffix(1);
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw ParseError("'" + path.string() + "': non-numeric cell '" + std::string(cell) +
                             "' at row " + std::to_string(row + 1) + ", column " +
                             std::to_string(column + 1),
                         row + 1, column + 1);
      }
      cells.push_back(v);
      ++column;
      start = end + 1;
    }
    if (!rows.empty() && cells.size() != rows.front().size()) {
      throw SchemaError("'" + path.string() + "': row " + std::to_string(row + 1) +
                        " has a different column count");
    }
    rows.push_back(std::move(cells));
    ++row;
  }
  if (rows.empty()) throw SchemaError("'" + path.string() + "' is empty");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return m;
}

void write_csv_matrix(const fs::path& path, const Matrix& values) {
  std::string text;
  text.reserve(static_cast<std::size_t>(values.size()) * 20);
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      if (j > 0) text.push_back(',');
      text += format_double(values(i, j));
    }
    text.push_back('\n');
  }
  write_file_atomic(path, text);
}

Dataset load_dataset(const fs::path& manifest_path) {
  const json manifest = read_json(manifest_path);
  Dataset ds;
  try {
    ds.name = manifest.at("name").get<std::string>();
    ds.n_regions = manifest.at("n_regions").get<Eigen::Index>();
    ds.labeled = manifest.at("labeled").get<bool>();
    const fs::path base = manifest_path.parent_path();
    for (const auto& entry : manifest.at("subjects")) {
      SubjectRecord rec;
      rec.subject_id = entry.at("id").get<std::string>();
      fs::path p = entry.at("path").get<std::string>();
      if (p.is_relative()) p = base / p;
      if (!fs::exists(p)) throw IoError("missing subject file '" + p.string() + "'");
      Matrix values = read_csv_matrix(p);
      if (values.rows() != ds.n_regions) {
        throw SchemaError("subject '" + rec.subject_id + "' has " + std::to_string(values.rows()) +
                          " regions, manifest declares " + std::to_string(ds.n_regions));
      }
      try {
        rec.bold = BoldMatrix::from_values(std::move(values));
      } catch (const SchemaError& e) {
        throw SchemaError("subject '" + rec.subject_id + "': " + e.what());
      }
      if (ds.labeled) {
        if (!entry.contains("label")) throw SchemaError("subject '" + rec.subject_id + "' has no label");
        rec.label = entry.at("label").get<int>();
      }
      ds.subjects.push_back(std::move(rec));
    }
  } catch (const json::exception& e) {
    throw SchemaError("'" + manifest_path.string() + "': " + e.what());
  }
  ds.validate();
  return ds;
}

void save_dataset(const Dataset& dataset, const fs::path& dir) {
  fs::create_directories(dir / "subjects");
  json subjects = json::array();
  for (const auto& s : dataset.subjects) {
    const std::string rel = "subjects/" + s.subject_id + ".csv";
    write_csv_matrix(dir / rel, s.bold.values);
    json entry = {{"id", s.subject_id}, {"path", rel}};
    if (dataset.labeled && s.label) entry["label"] = *s.label;
    subjects.push_back(std::move(entry));
  }
  const json manifest = {{"name", dataset.name},
                         {"n_regions", dataset.n_regions},
                         {"labeled", dataset.labeled},
                         {"subjects", std::move(subjects)}};
  write_json(dir / "manifest.json", manifest);
}

Matrix coupling_template(int n_regions, int class_index) {
  if (n_regions < 2) throw ConfigError("coupling template needs at least 2 regions");
  Matrix edges = Matrix::Zero(n_regions, n_regions);  // (target, source)
  if (class_index == 0) {
    // Directed ring.
    for (int i = 0; i < n_regions; ++i) edges((i + 1) % n_regions, i) = 1.0;
  } else if (class_index == 1) {
    // Groups of four: the first node of each group drives the other three,
    // and the last node of a group drives the next group's hub.
    for (int hub = 0; hub < n_regions; hub += 4) {
      const int last = std::min(hub + 3, n_regions - 1);
      for (int child = hub + 1; child <= last; ++child) edges(child, hub) = 1.0;
      const int next = (last + 1) % n_regions;
      if (next != last) edges(next, last) = 1.0;
    }
  } else {
    throw ConfigError("coupling template class must be 0 or 1");
  }
  for (int i = 0; i < n_regions; ++i) {
    const double indeg = edges.row(i).sum();
    if (indeg > 0.0) edges.row(i) /= indeg;
  }
  return edges;
}

namespace {

double edge_difference(const Matrix& a, const Matrix& b) {
  const auto ea = (a.array() != 0.0);
  const auto eb = (b.array() != 0.0);
  const double na = static_cast<double>(ea.count());
  const double nb = static_cast<double>(eb.count());
  const double shared = static_cast<double>((ea && eb).count());
  const double larger = std::max(na, nb);
  return larger == 0.0 ? 0.0 : (larger - shared) / larger;
}

double spectral_radius(const Matrix& m) {
  Eigen::EigenSolver<Matrix> solver(m, false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

Dataset synth_generate(const SynthOptions& o) {
  if (o.n_classes != 1 && o.n_classes != 2) throw ConfigError("n_classes must be 1 or 2");
  if (o.n_subjects < 1) throw ConfigError("n_subjects must be positive");
  if (o.n_regions < 2) throw ConfigError("n_regions must be at least 2");
  if (o.n_timepoints < 8) throw ConfigError("n_timepoints must be at least 8");
  if (!(o.coupling_strength >= 0.0 && o.coupling_strength < 1.0)) {
    throw ConfigError("coupling_strength must lie in [0, 1)");
  }
  if (!(o.noise_std > 0.0)) throw ConfigError("noise_std must be positive");

  std::vector<Matrix> templates, transitions;
  for (int k = 0; k < o.n_classes; ++k) {
    Matrix c = coupling_template(o.n_regions, k);
    templates.push_back(c);
    const double radius = spectral_radius(c);
    if (radius > 1.0) c /= radius;
    Matrix effective = o.coupling_strength * c;
    if (!(spectral_radius(effective) < 1.0 - 1e-12)) {
      throw ConfigError("coupled process is not stationary");
    }
    transitions.push_back(std::move(effective));
  }
  if (o.n_classes == 2 && edge_difference(templates[0], templates[1]) < 0.25) {
    throw ConfigError("class templates differ in fewer than 25% of edges for n_regions=" +
                      std::to_string(o.n_regions));
  }

  Dataset ds;
  ds.name = o.name;
  ds.n_regions = o.n_regions;
  ds.labeled = true;
  Rng rng(o.seed);
  const int n = o.n_regions;
  for (int s = 0; s < o.n_subjects; ++s) {
    const int label = s % o.n_classes;
    const Matrix& a = transitions[static_cast<std::size_t>(label)];
    Vector x = Vector::Zero(n);
    Vector noise(n);
    Matrix values(n, o.n_timepoints);
    for (int t = -o.burn_in; t < o.n_timepoints; ++t) {
      for (int i = 0; i < n; ++i) noise(i) = o.noise_std * rng.normal();
      x = a * x + noise;
      if (t >= 0) values.col(t) = x;
    }
    SubjectRecord rec;
    char id[32];
    std::snprintf(id, sizeof id, "sub-%04d", s);
    rec.subject_id = id;
    rec.bold = BoldMatrix::from_values(std::move(values));
    rec.label = label;
    ds.subjects.push_back(std::move(rec));
  }
  return ds;
}

Dataset strip_labels(Dataset dataset) {
  dataset.labeled = false;
  for (auto& s : dataset.subjects) s.label.reset();
  return dataset;
}

}  // namespace connlearn
