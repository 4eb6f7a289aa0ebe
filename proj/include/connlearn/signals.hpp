#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "connlearn/autodiff.hpp"

namespace connlearn {

/// Multivariate time series of one subject: one row per region, one column
/// per time point.
struct BoldMatrix {
  Matrix values;
  std::vector<std::string> region_ids;

  Eigen::Index regions() const { return values.rows(); }
  Eigen::Index timepoints() const { return values.cols(); }

  /// Builds a matrix with region ids r0..r{N-1} and checks the invariants.
  static BoldMatrix from_values(Matrix values);
  /// Throws SchemaError unless N >= 2, T >= 8 and every entry is finite.
  void validate() const;
};

struct ZScoreResult {
  BoldMatrix bold;
  /// Regions whose signal was constant; their rows are zero.
  std::vector<Eigen::Index> constant_rows;
};

/// Standardizes each row to mean 0 and population variance 1.
ZScoreResult zscore_rows(const BoldMatrix& bold);

struct SubjectRecord {
  std::string subject_id;
  BoldMatrix bold;
  std::optional<int> label;
};

struct Dataset {
  std::string name;
  Eigen::Index n_regions = 0;
  bool labeled = false;
  std::vector<SubjectRecord> subjects;

  /// Common series length, or nullopt when subjects differ.
  std::optional<Eigen::Index> uniform_timepoints() const;
  const SubjectRecord& find(const std::string& subject_id) const;
  std::vector<int> labels() const;
  /// Checks ids are unique, region counts agree and labels are 0/1.
  void validate() const;
};

// Per-subject CSV: N rows x T columns, no header.
Matrix read_csv_matrix(const std::filesystem::path& path);
void write_csv_matrix(const std::filesystem::path& path, const Matrix& values);

/// Reads a dataset manifest and every subject file it references. Relative
/// subject paths resolve against the manifest's directory.
Dataset load_dataset(const std::filesystem::path& manifest_path);
/// Writes <dir>/manifest.json and <dir>/subjects/<id>.csv.
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);

struct SynthOptions {
  int n_subjects = 60;
  int n_regions = 16;
  int n_timepoints = 200;
  int n_classes = 2;
  double coupling_strength = 0.6;
  double noise_std = 1.0;
  std::uint64_t seed = 0;
  int burn_in = 100;
  std::string name = "synthetic";
};

/// Directed coupling template of a class: entry (i, j) is the weight of the
/// edge j -> i. Rows with parents sum to 1.
Matrix coupling_template(int n_regions, int class_index);

/// Labeled vector-autoregressive corpus; class k follows
/// x_t = coupling * C_k x_{t-1} + noise. Labels are assigned round-robin.
Dataset synth_generate(const SynthOptions& options);

/// Copy of the dataset with every label removed.
Dataset strip_labels(Dataset dataset);

}  // namespace connlearn
