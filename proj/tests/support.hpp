#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "optmarl/diffcore/graph.hpp"
#include "optmarl/diffcore/ops.hpp"

namespace testsupport {

using optmarl::diffcore::Graph;
using optmarl::diffcore::Matrix;
using optmarl::diffcore::ParameterStore;
using optmarl::diffcore::Var;

inline Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (Eigen::Index j = 0; j < c; ++j)
    for (Eigen::Index i = 0; i < r; ++i) m(i, j) = n(rng);
  return m;
}

/// Builds a scalar loss from the store on the given graph.
using LossFn = std::function<Var(Graph&, ParameterStore&)>;

struct GradCheck {
  double rel_error = 0.0;  // ‖analytic − numeric‖ / (‖analytic‖ + ‖numeric‖)
  double analytic_norm = 0.0;
  std::size_t entries = 0;
  std::size_t refined = 0;  // entries whose stencil straddled a kink
};

/// Central finite differences (step h) over every parameter entry, compared
/// as whole vectors against the tape's gradients. ReLU and |·| make the
/// loss piecewise smooth; when the one-sided slopes of an entry disagree the
/// stencil crossed a kink, and that entry is re-differenced with step h/1000.
inline GradCheck finite_difference_check(ParameterStore& store, const LossFn& loss, double h = 1e-5) {
  store.zero_grad();
  double f0 = 0.0;
  {
    Graph g;
    Var l = loss(g, store);
    f0 = l.scalar();
    g.backward(l);
  }
  const auto eval = [&] {
    Graph g(false);
    return loss(g, store).scalar();
  };
  GradCheck out;
  double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
  for (auto& [name, p] : store) {
    for (Eigen::Index k = 0; k < p.value.size(); ++k) {
      double& x = p.value.data()[k];
      const double saved = x;
      x = saved + h;
      const double up = eval();
      x = saved - h;
      const double down = eval();
      double numeric = (up - down) / (2.0 * h);
      const double fwd = (up - f0) / h, bwd = (f0 - down) / h;
      if (std::abs(fwd - bwd) > 1e-2 * std::max(1.0, std::abs(fwd) + std::abs(bwd))) {
        const double small = h * 1e-3;
        x = saved + small;
        const double u2 = eval();
        x = saved - small;
        const double d2 = eval();
        numeric = (u2 - d2) / (2.0 * small);
        ++out.refined;
      }
      x = saved;
      const double analytic = p.grad.data()[k];
      diff2 += (analytic - numeric) * (analytic - numeric);
      a2 += analytic * analytic;
      n2 += numeric * numeric;
      ++out.entries;
    }
  }
  store.zero_grad();
  const double denom = std::sqrt(a2) + std::sqrt(n2);
  out.rel_error = denom > 1e-12 ? std::sqrt(diff2) / denom : std::sqrt(diff2);
  out.analytic_norm = std::sqrt(a2);
  return out;
}

/// Pearson χ² goodness of fit; true when not rejected at `alpha`.
inline bool chi_squared_accepts(const std::vector<long long>& counts, const std::vector<double>& probs,
                                double alpha = 0.001) {
  long long total = 0;
  for (long long c : counts) total += c;
  double stat = 0.0;
  int dof = -1;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double expected = probs[i] * static_cast<double>(total);
    if (expected <= 0.0) {
      if (counts[i] != 0) return false;
      continue;
    }
    stat += (static_cast<double>(counts[i]) - expected) * (static_cast<double>(counts[i]) - expected) / expected;
    ++dof;
  }
  if (dof <= 0) return true;
  boost::math::chi_squared dist(dof);
  return boost::math::cdf(boost::math::complement(dist, stat)) >= alpha;
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("optmarl-" + tag + "-" + std::to_string(rd()));
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

 private:
  std::filesystem::path path_;
};

}  // namespace testsupport
