#pragma once

// Shared fixtures and independent reference implementations. The oracles
// are written as plain loops over the textbook definitions and share no
// code with the library.

#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include <unistd.h>

#include "connlearn/autodiff.hpp"
#include "connlearn/rng.hpp"

namespace testing_support {

using connlearn::Matrix;

inline Matrix random_matrix(connlearn::Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = scale * rng.normal();
  }
  return m;
}

/// Fresh empty directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("connlearn-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

namespace oracle {

/// Pearson correlation from the covariance formula.
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    mx += x[t];
    my += y[t];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    sxy += (x[t] - mx) * (y[t] - my);
    sxx += (x[t] - mx) * (x[t] - mx);
    syy += (y[t] - my) * (y[t] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

/// Plug-in transfer entropy source -> target on already-discrete symbols,
/// from joint probabilities and conditional ratios, in bits.
inline double transfer_entropy(const std::vector<int>& target, const std::vector<int>& source, int lag) {
  std::map<std::tuple<int, int, int>, double> p_next_now_src;
  std::map<std::pair<int, int>, double> p_now_src, p_next_now;
  std::map<int, double> p_now;
  const std::size_t n = target.size() - static_cast<std::size_t>(lag);
  const double w = 1.0 / static_cast<double>(n);
  for (std::size_t t = 0; t < n; ++t) {
    const int next = target[t + static_cast<std::size_t>(lag)];
    const int now = target[t];
    const int src = source[t];
    p_next_now_src[{next, now, src}] += w;
    p_now_src[{now, src}] += w;
    p_next_now[{next, now}] += w;
    p_now[now] += w;
  }
  double te = 0.0;
  for (const auto& [key, p] : p_next_now_src) {
    const auto [next, now, src] = key;
    const double cond_full = p / p_now_src[{now, src}];
    const double cond_self = p_next_now[{next, now}] / p_now[now];
    te += p * std::log2(cond_full / cond_self);
  }
  return te;
}

/// -(1/B) sum_i log(exp(f_i.e_i/tau) / sum_{k != anchor} exp(f_i.p_k/tau))
/// over the pool [f_1..f_B, e_1..e_B], embeddings normalized first.
inline double nt_xent(std::vector<std::vector<double>> fc, std::vector<std::vector<double>> ec, double tau) {
  auto normalize = [](std::vector<double>& v) {
    double n = 0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n > 0) {
      for (double& x : v) x /= n;
    }
  };
  for (auto& v : fc) normalize(v);
  for (auto& v : ec) normalize(v);
  auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
    return s;
  };
  const std::size_t b = fc.size();
  std::vector<std::vector<double>> pool = fc;
  pool.insert(pool.end(), ec.begin(), ec.end());
  double total = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    double denom = 0.0;
    for (std::size_t k = 0; k < pool.size(); ++k) {
      if (k != i) denom += std::exp(dot(fc[i], pool[k]) / tau);
    }
    total -= std::log(std::exp(dot(fc[i], ec[i]) / tau) / denom);
  }
  return total / static_cast<double>(b);
}

inline double graph_loss(const Matrix& h, const Matrix& a, double gamma) {
  double smooth = 0.0, frob = 0.0;
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    for (Eigen::Index j = 0; j < h.rows(); ++j) {
      double d2 = 0.0;
      for (Eigen::Index k = 0; k < h.cols(); ++k) d2 += (h(i, k) - h(j, k)) * (h(i, k) - h(j, k));
      smooth += d2 * a(i, j);
      frob += a(i, j) * a(i, j);
    }
  }
  return smooth + gamma * frob;
}

inline Matrix relu(Matrix m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std::max(0.0, m.data()[i]);
  return m;
}

/// Two plain graph convolutions with self loops and row normalization.
inline Matrix plain_gcn(const Matrix& a, const Matrix& x, const Matrix& u1, const Matrix& b1, const Matrix& u2,
                        const Matrix& b2) {
  const Eigen::Index n = a.rows();
  Matrix p(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double deg = 1.0;
    for (Eigen::Index j = 0; j < n; ++j) deg += a(i, j);
    for (Eigen::Index j = 0; j < n; ++j) p(i, j) = (a(i, j) + (i == j ? 1.0 : 0.0)) / deg;
  }
  Matrix z1 = p * x * u1;
  for (Eigen::Index i = 0; i < n; ++i) z1.row(i) += b1;
  z1 = relu(z1);
  Matrix z2 = p * z1 * u2;
  for (Eigen::Index i = 0; i < n; ++i) z2.row(i) += b2;
  return relu(z2);
}

/// Dense layer by explicit loops: out_j = sum_i in_i w_ij + b_j.
inline std::vector<double> affine(const std::vector<double>& in, const Matrix& w, const Matrix& b) {
  std::vector<double> out(static_cast<std::size_t>(w.cols()));
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    double s = b(0, j);
    for (Eigen::Index i = 0; i < w.rows(); ++i) s += in[static_cast<std::size_t>(i)] * w(i, j);
    out[static_cast<std::size_t>(j)] = s;
  }
  return out;
}

}  // namespace oracle
}  // namespace testing_support
