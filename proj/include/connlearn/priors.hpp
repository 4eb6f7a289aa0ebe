#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "connlearn/autodiff.hpp"

namespace connlearn {

enum class PriorKind { pearson, transfer_entropy };

/// Fixed structural relationship between region pairs. For transfer
/// entropy, values(i, j) is the information flow from region j to region i.
struct PriorMatrix {
  Matrix values;
  PriorKind kind = PriorKind::pearson;
  int bins = 0;
  int lag = 0;
};

/// Sample Pearson correlation of every row pair. A constant row correlates
/// 0 with every other row and 1 with itself.
PriorMatrix pearson_matrix(const Matrix& series);

/// Equal-frequency discretization of one series into `bins` levels. Ties
/// are ordered by time index, so the result is deterministic.
std::vector<int> quantile_bins(std::span<const double> series, int bins);

/// Plug-in transfer entropy source -> target in bits, from already
/// discretized series: sum p(y+, y, x) log2[p(y+ | y, x) / p(y+ | y)] with
/// y+ = target[t + lag], y = target[t], x = source[t]. Clamped at 0.
double transfer_entropy(std::span<const int> target, std::span<const int> source, int bins,
                        int lag);

/// values(i, j) = TE(region j -> region i); zero diagonal.
PriorMatrix transfer_entropy_matrix(const Matrix& series, int bins, int lag);

struct SubjectPriors {
  PriorMatrix pearson;
  PriorMatrix transfer_entropy;
};

/// Memoizes priors keyed by (sha256 of the series bytes, bins, lag). With a
/// directory set, entries are also persisted as little-endian binaries.
class PriorCache {
 public:
  PriorCache() = default;
  explicit PriorCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

  const SubjectPriors& get(const Matrix& series, int bins, int lag);
  std::size_t computed() const { return computed_; }

 private:
  using Key = std::tuple<std::string, int, int>;
  std::optional<std::filesystem::path> dir_;
  std::map<Key, SubjectPriors> memory_;
  std::size_t computed_ = 0;
};

}  // namespace connlearn
