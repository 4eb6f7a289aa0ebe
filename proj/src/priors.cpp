#include "connlearn/priors.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "connlearn/errors.hpp"
#include "connlearn/io.hpp"

namespace connlearn {

namespace fs = std::filesystem;

PriorMatrix pearson_matrix(const Matrix& series) {
  const Eigen::Index n = series.rows();
  if (series.cols() < 2) throw ContractError("pearson_matrix: needs at least 2 time points");
  Matrix centered = series.colwise() - series.rowwise().mean();
  const Vector norms = centered.rowwise().norm();
  PriorMatrix out{Matrix::Identity(n, n), PriorKind::pearson, 0, 0};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double r = 0.0;
      if (norms(i) > 0.0 && norms(j) > 0.0) {
        r = centered.row(i).dot(centered.row(j)) / (norms(i) * norms(j));
        r = std::clamp(r, -1.0, 1.0);
      }
      out.values(i, j) = r;
      out.values(j, i) = r;
    }
  }
  return out;
}

std::vector<int> quantile_bins(std::span<const double> series, int bins) {
  const std::size_t t = series.size();
  std::vector<std::size_t> order(t);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return series[a] < series[b]; });
  std::vector<int> out(t);
  for (std::size_t rank = 0; rank < t; ++rank) {
    out[order[rank]] = static_cast<int>((rank * static_cast<std::size_t>(bins)) / t);
  }
  return out;
}

double transfer_entropy(std::span<const int> target, std::span<const int> source, int bins,
                        int lag) {
  if (target.size() != source.size()) throw ContractError("transfer_entropy: length mismatch");
  if (lag < 1) throw ConfigError("transfer entropy lag must be at least 1");
  if (target.size() <= static_cast<std::size_t>(lag)) return 0.0;
  const std::size_t b = static_cast<std::size_t>(bins);
  const std::size_t samples = target.size() - static_cast<std::size_t>(lag);
  // joint[(next * b + now) * b + src]
  std::vector<double> joint(b * b * b, 0.0);
  for (std::size_t t = 0; t < samples; ++t) {
    const auto next = static_cast<std::size_t>(target[t + static_cast<std::size_t>(lag)]);
    const auto now = static_cast<std::size_t>(target[t]);
    const auto src = static_cast<std::size_t>(source[t]);
    joint[(next * b + now) * b + src] += 1.0;
  }
  std::vector<double> now_src(b * b, 0.0), next_now(b * b, 0.0), now_only(b, 0.0);
  for (std::size_t next = 0; next < b; ++next) {
    for (std::size_t now = 0; now < b; ++now) {
      for (std::size_t src = 0; src < b; ++src) {
        const double c = joint[(next * b + now) * b + src];
        now_src[now * b + src] += c;
        next_now[next * b + now] += c;
        now_only[now] += c;
      }
    }
  }
  double te = 0.0;
  for (std::size_t next = 0; next < b; ++next) {
    for (std::size_t now = 0; now < b; ++now) {
      for (std::size_t src = 0; src < b; ++src) {
        const double c = joint[(next * b + now) * b + src];
        if (c == 0.0) continue;
        // p(y+|y,x) / p(y+|y) = c * n(y) / (n(y,x) * n(y+,y)); counts cancel the total.
        te += c * std::log2(c * now_only[now] / (now_src[now * b + src] * next_now[next * b + now]));
      }
    }
  }
  return std::max(0.0, te / static_cast<double>(samples));
}

PriorMatrix transfer_entropy_matrix(const Matrix& series, int bins, int lag) {
  if (bins < 2) throw ConfigError("transfer entropy needs at least 2 bins");
  if (lag < 1) throw ConfigError("transfer entropy lag must be at least 1");
  const Eigen::Index n = series.rows();
  const Eigen::Index t = series.cols();
  if (bins > t) throw ConfigError("transfer entropy bins exceed series length");
  if (t < lag + 4) throw ConfigError("series too short for the transfer entropy lag");
  std::vector<std::vector<int>> binned(static_cast<std::size_t>(n));
  std::vector<double> row(static_cast<std::size_t>(t));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < t; ++k) row[static_cast<std::size_t>(k)] = series(i, k);
    binned[static_cast<std::size_t>(i)] = quantile_bins(row, bins);
  }
  PriorMatrix out{Matrix::Zero(n, n), PriorKind::transfer_entropy, bins, lag};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      out.values(i, j) = transfer_entropy(binned[static_cast<std::size_t>(i)],
                                          binned[static_cast<std::size_t>(j)], bins, lag);
    }
  }
  return out;
}

namespace {

std::string matrix_bytes(const Matrix& m) {
  // Row-major little-endian doubles, prefixed by the shape.
  std::string out;
  const std::int64_t shape[2] = {m.rows(), m.cols()};
  out.append(reinterpret_cast<const char*>(shape), sizeof shape);
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double v = m(i, j);
      out.append(reinterpret_cast<const char*>(&v), sizeof v);
    }
  }
  return out;
}

Matrix matrix_from_bytes(std::string_view bytes, std::size_t& offset) {
  std::int64_t shape[2];
  if (bytes.size() < offset + sizeof shape) throw IoError("truncated prior cache entry");
  std::memcpy(shape, bytes.data() + offset, sizeof shape);
  offset += sizeof shape;
  Matrix m(shape[0], shape[1]);
  if (bytes.size() < offset + static_cast<std::size_t>(m.size()) * sizeof(double)) {
    throw IoError("truncated prior cache entry");
  }
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::memcpy(&m(i, j), bytes.data() + offset, sizeof(double));
      offset += sizeof(double);
    }
  }
  return m;
}

}  // namespace

const SubjectPriors& PriorCache::get(const Matrix& series, int bins, int lag) {
  const std::string hash = sha256_hex(matrix_bytes(series));
  const Key key{hash, bins, lag};
  if (auto it = memory_.find(key); it != memory_.end()) return it->second;

  fs::path file;
  if (dir_) {
    file = *dir_ / (hash + "-b" + std::to_string(bins) + "-l" + std::to_string(lag) + ".bin");
    if (fs::exists(file)) {
      const std::string bytes = read_file(file);
      std::size_t offset = 0;
      SubjectPriors p;
      p.pearson = PriorMatrix{matrix_from_bytes(bytes, offset), PriorKind::pearson, 0, 0};
      p.transfer_entropy =
          PriorMatrix{matrix_from_bytes(bytes, offset), PriorKind::transfer_entropy, bins, lag};
      return memory_.emplace(key, std::move(p)).first->second;
    }
  }
  SubjectPriors p{pearson_matrix(series), transfer_entropy_matrix(series, bins, lag)};
  ++computed_;
  if (dir_) write_file_atomic(file, matrix_bytes(p.pearson.values) + matrix_bytes(p.transfer_entropy.values));
  return memory_.emplace(key, std::move(p)).first->second;
}

}  // namespace connlearn
