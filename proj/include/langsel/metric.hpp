#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "langsel/error.hpp"
#include "langsel/typology.hpp"

namespace langsel {

namespace detail {

inline double norm(std::span<const double> v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  return std::sqrt(sq);
}

}  // namespace detail

// Angle between u and v divided by pi, in [0, 1].
//
// Evaluated as 2*atan2(|u^ - v^|, |u^ + v^|) on the unit vectors, which is
// arccos(clamp(cos, -1, 1)) in exact arithmetic but keeps full relative
// accuracy near 0 and 1 where arccos of a rounded cosine loses ~1e-8.
// Symmetric bitwise: swapping arguments only negates the difference terms.
inline double angular_distance(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw validation_error("angular_distance: dimension mismatch (" + std::to_string(u.size()) +
                           " vs " + std::to_string(v.size()) + ")");
  }
  const double nu = detail::norm(u);
  const double nv = detail::norm(v);
  if (!(nu > 0.0) || !(nv > 0.0)) throw validation_error("angular_distance: zero-norm input");
  if (!std::isfinite(nu) || !std::isfinite(nv)) {
    throw validation_error("angular_distance: non-finite input");
  }
  double diff_sq = 0.0;
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double a = u[i] / nu;
    const double b = v[i] / nv;
    diff_sq += (a - b) * (a - b);
    sum_sq += (a + b) * (a + b);
  }
  const double angle = 2.0 * std::atan2(std::sqrt(diff_sq), std::sqrt(sum_sq));
  return std::clamp(angle / std::numbers::pi, 0.0, 1.0);
}

// Symmetric m x m matrix of angular distances over an ordered code list.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  DistanceMatrix(std::vector<std::string> codes, std::vector<double> values)
      : codes_(std::move(codes)), values_(std::move(values)) {
    if (values_.size() != codes_.size() * codes_.size()) {
      throw validation_error("DistanceMatrix: value count does not match code count");
    }
    for (std::size_t i = 0; i < codes_.size(); ++i) {
      if (!index_.emplace(codes_[i], i).second) {
        throw validation_error("DistanceMatrix: duplicate code '" + codes_[i] + "'");
      }
    }
  }

  std::size_t size() const { return codes_.size(); }
  const std::vector<std::string>& codes() const { return codes_; }

  double operator()(std::size_t i, std::size_t j) const { return values_[i * codes_.size() + j]; }

  std::size_t index_of(const std::string& code) const {
    const auto it = index_.find(code);
    if (it == index_.end()) {
      throw validation_error("unknown language code '" + code + "' (not in distance matrix)");
    }
    return it->second;
  }

  bool contains(const std::string& code) const { return index_.count(code) > 0; }

  double at(const std::string& a, const std::string& b) const {
    return (*this)(index_of(a), index_of(b));
  }

 private:
  std::vector<std::string> codes_;
  std::vector<double> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Each unordered pair is evaluated once and mirrored. Rows are distributed
// over `threads` workers (0 = hardware concurrency); every entry depends only
// on its two input vectors, so the result does not depend on the split.
inline DistanceMatrix pairwise_matrix(const Catalog& catalog, const std::vector<std::string>& pool,
                                      unsigned threads = 1) {
  if (!catalog.has_vectors()) throw validation_error("pairwise_matrix: catalog has no feature vectors");
  std::vector<const LanguageRecord*> recs;
  recs.reserve(pool.size());
  for (const auto& code : pool) recs.push_back(&catalog.at(code));
  const std::size_t m = pool.size();
  std::vector<double> values(m * m, 0.0);

  std::atomic<std::size_t> next_row{0};
  const auto work = [&] {
    for (std::size_t i = next_row++; i < m; i = next_row++) {
      for (std::size_t j = i + 1; j < m; ++j) {
        const double d = angular_distance(recs[i]->vector, recs[j]->vector);
        values[i * m + j] = d;
        values[j * m + i] = d;
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(m, 1)));
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::thread> workers;
    for (unsigned t = 0; t < threads; ++t) workers.emplace_back(work);
    for (auto& w : workers) w.join();
  }
  return DistanceMatrix(pool, std::move(values));
}

}  // namespace langsel
