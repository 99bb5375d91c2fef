#pragma once

// Sentence-level contrastive realignment loss over B aligned pairs of mean
// token embeddings, with its analytic gradient and a central-difference
// verifier.
//
// Embedding k in [0, 2B) is source k for k < B and target k - B otherwise;
// its translation partner is k +/- B. Every embedding is an anchor:
//
//   loss = -(1/2B) * sum_k [ s(k, partner(k)) / T - log sum_{j in D(k)} exp(s(k, j) / T) ]
//
// with s the cosine similarity and D(k) = {j != k} (the positive stays in the
// denominator) or, optionally, {j != k, j != partner(k)}.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "langsel/detail/text.hpp"
#include "langsel/error.hpp"

namespace langsel {

// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
};

inline constexpr double kDefaultTemperature = 0.1;

struct AlignedBatch {
  std::vector<std::vector<double>> source;
  std::vector<std::vector<double>> target;
  double temperature = kDefaultTemperature;

  std::size_t size() const { return source.size(); }
};

struct LossOptions {
  bool include_positive_in_denominator = true;
};

struct LossReport {
  double loss = 0.0;
  Matrix gradient;    // 2B x d, rows in embedding order
  Matrix similarity;  // 2B x 2B cosine similarities
};

// Mean of the unmasked token vectors (mask[i] == true keeps token i).
inline std::vector<double> average_tokens(const std::vector<std::vector<double>>& tokens,
                                          const std::optional<std::vector<bool>>& mask = std::nullopt) {
  if (mask && mask->size() != tokens.size()) {
    throw validation_error("average_tokens: mask length does not match token count");
  }
  std::vector<double> sum;
  std::size_t count = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (mask && !(*mask)[i]) continue;
    if (count == 0) {
      sum.assign(tokens[i].size(), 0.0);
    } else if (tokens[i].size() != sum.size()) {
      throw validation_error("average_tokens: token dimensions differ");
    }
    for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += tokens[i][j];
    ++count;
  }
  if (count == 0) throw validation_error("average_tokens: no unmasked tokens");
  for (double& v : sum) v /= static_cast<double>(count);
  return sum;
}

namespace detail {

inline Matrix stack_embeddings(const AlignedBatch& batch) {
  const std::size_t b = batch.size();
  if (b < 2) throw validation_error("contrastive loss needs at least 2 pairs, got " + std::to_string(b));
  if (batch.target.size() != b) throw validation_error("source and target counts differ");
  if (!(batch.temperature > 0.0) || !std::isfinite(batch.temperature)) {
    throw validation_error("temperature must be positive");
  }
  const std::size_t d = batch.source.front().size();
  if (d == 0) throw validation_error("embeddings must have positive dimension");
  Matrix x(2 * b, d);
  for (std::size_t k = 0; k < 2 * b; ++k) {
    const auto& v = k < b ? batch.source[k] : batch.target[k - b];
    if (v.size() != d) throw validation_error("embedding " + std::to_string(k) + " has the wrong dimension");
    double sq = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      if (!std::isfinite(v[j])) throw validation_error("embedding " + std::to_string(k) + " is not finite");
      x(k, j) = v[j];
      sq += v[j] * v[j];
    }
    if (!(sq > 0.0)) throw validation_error("embedding " + std::to_string(k) + " has zero norm");
  }
  return x;
}

struct UnitRows {
  Matrix unit;
  std::vector<double> norm;
};

inline UnitRows normalize_rows(const Matrix& x) {
  UnitRows u{Matrix(x.rows, x.cols), std::vector<double>(x.rows)};
  for (std::size_t k = 0; k < x.rows; ++k) {
    double sq = 0.0;
    for (double v : x.row(k)) sq += v * v;
    u.norm[k] = std::sqrt(sq);
    for (std::size_t j = 0; j < x.cols; ++j) u.unit(k, j) = x(k, j) / u.norm[k];
  }
  return u;
}

inline Matrix cosine_matrix(const Matrix& unit) {
  Matrix s(unit.rows, unit.rows);
  for (std::size_t i = 0; i < unit.rows; ++i) {
    for (std::size_t j = i; j < unit.rows; ++j) {
      double dot = 0.0;
      for (std::size_t c = 0; c < unit.cols; ++c) dot += unit(i, c) * unit(j, c);
      s(i, j) = dot;
      s(j, i) = dot;
    }
  }
  return s;
}

inline bool in_denominator(std::size_t k, std::size_t j, std::size_t b, const LossOptions& opt) {
  if (j == k) return false;
  if (!opt.include_positive_in_denominator && j == (k + b) % (2 * b)) return false;
  return true;
}

// log sum exp of `v` after sorting, so the value depends only on the multiset.
inline double sorted_logsumexp(std::vector<double>& v) {
  std::sort(v.begin(), v.end());
  const double top = v.back();
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - top);
  return top + std::log(sum);
}

// Per-anchor terms s(k,partner)/T - lse_k, plus each anchor's lse.
struct AnchorTerms {
  std::vector<double> term;
  std::vector<double> lse;
};

inline AnchorTerms anchor_terms(const Matrix& sim, double temperature, const LossOptions& opt) {
  const std::size_t n = sim.rows;
  const std::size_t b = n / 2;
  AnchorTerms out{std::vector<double>(n), std::vector<double>(n)};
  std::vector<double> logits;
  for (std::size_t k = 0; k < n; ++k) {
    logits.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (in_denominator(k, j, b, opt)) logits.push_back(sim(k, j) / temperature);
    }
    out.lse[k] = sorted_logsumexp(logits);
    out.term[k] = sim(k, (k + b) % n) / temperature - out.lse[k];
  }
  return out;
}

inline double reduce_loss(std::vector<double> terms) {
  std::sort(terms.begin(), terms.end());
  double sum = 0.0;
  for (double t : terms) sum += t;
  return -sum / static_cast<double>(terms.size());
}

}  // namespace detail

// Loss as a function of a 2B x 2B similarity matrix alone. Anchor terms are
// reduced in sorted order, which makes the value invariant (bitwise) to the
// order of the pairs.
inline double loss_from_similarity(const Matrix& similarity, double temperature,
                                   const LossOptions& options = {}) {
  if (similarity.rows != similarity.cols || similarity.rows < 4 || similarity.rows % 2 != 0) {
    throw validation_error("similarity matrix must be 2B x 2B with B >= 2");
  }
  if (!(temperature > 0.0)) throw validation_error("temperature must be positive");
  return detail::reduce_loss(detail::anchor_terms(similarity, temperature, options).term);
}

inline LossReport contrastive_loss(const AlignedBatch& batch, const LossOptions& options = {}) {
  const Matrix x = detail::stack_embeddings(batch);
  const std::size_t n = x.rows;
  const std::size_t b = n / 2;
  const double t = batch.temperature;
  const auto [unit, norm] = detail::normalize_rows(x);

  LossReport report;
  report.similarity = detail::cosine_matrix(unit);
  const auto terms = detail::anchor_terms(report.similarity, t, options);
  report.loss = detail::reduce_loss(terms.term);

  // dloss/ds(k,j) from anchor k, then symmetrized since s(k,j) = s(j,k).
  const double scale = -1.0 / (static_cast<double>(n) * t);
  Matrix coef(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j = 0; j < n; ++j) {
      double c = j == (k + b) % n ? 1.0 : 0.0;
      if (detail::in_denominator(k, j, b, options)) c -= std::exp(report.similarity(k, j) / t - terms.lse[k]);
      coef(k, j) = scale * c;
    }
  }
  report.gradient = Matrix(n, x.cols);
  std::vector<double> g_unit(x.cols);
  for (std::size_t k = 0; k < n; ++k) {
    std::fill(g_unit.begin(), g_unit.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      const double w = coef(k, j) + coef(j, k);
      if (w == 0.0) continue;
      for (std::size_t c = 0; c < x.cols; ++c) g_unit[c] += w * unit(j, c);
    }
    // Project out the radial component: d(x/|x|)/dx = (I - u u^T) / |x|.
    double radial = 0.0;
    for (std::size_t c = 0; c < x.cols; ++c) radial += g_unit[c] * unit(k, c);
    for (std::size_t c = 0; c < x.cols; ++c) {
      report.gradient(k, c) = (g_unit[c] - radial * unit(k, c)) / norm[k];
    }
  }
  return report;
}

// Max over all coordinates of |analytic - central difference| / max(1, |analytic|).
inline double gradient_check(const AlignedBatch& batch, double epsilon, const LossOptions& options = {}) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) {
    throw validation_error("gradient_check: epsilon must lie in [1e-7, 1e-3]");
  }
  const LossReport analytic = contrastive_loss(batch, options);
  const Matrix x0 = detail::stack_embeddings(batch);
  const auto loss_at = [&](const Matrix& x) {
    const auto u = detail::normalize_rows(x);
    return loss_from_similarity(detail::cosine_matrix(u.unit), batch.temperature, options);
  };
  Matrix x = x0;
  double worst = 0.0;
  for (std::size_t k = 0; k < x.rows; ++k) {
    for (std::size_t c = 0; c < x.cols; ++c) {
      x(k, c) = x0(k, c) + epsilon;
      const double up = loss_at(x);
      x(k, c) = x0(k, c) - epsilon;
      const double down = loss_at(x);
      x(k, c) = x0(k, c);
      const double numeric = (up - down) / (2.0 * epsilon);
      const double a = analytic.gradient(k, c);
      worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
    }
  }
  return worst;
}

// Batch file: tab-separated `pair_index  side  v1 ... vd`, side in {src, tgt};
// an optional header line starts with `pair_index`.
inline AlignedBatch load_batch(const std::string& path, double temperature = kDefaultTemperature) {
  const auto lines = detail::read_lines(path);
  std::map<std::size_t, std::vector<double>> src;
  std::map<std::size_t, std::vector<double>> tgt;
  std::optional<std::size_t> dim;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const std::size_t line_no = ln + 1;
    if (detail::trim(lines[ln]).empty()) continue;
    const auto f = detail::split_fields(lines[ln], '\t');
    if (detail::trim(f[0].text) == "pair_index") continue;
    if (f.size() < 3) throw parse_error(path, line_no, 1, "expected pair_index, side and values");
    const auto idx = detail::parse_integer<std::size_t>(f[0].text);
    if (!idx) throw parse_error(path, line_no, f[0].column, "invalid pair index '" + std::string(f[0].text) + "'");
    const std::string_view side = detail::trim(f[1].text);
    if (side != "src" && side != "tgt") {
      throw parse_error(path, line_no, f[1].column, "side must be src or tgt, got '" + std::string(side) + "'");
    }
    std::vector<double> v;
    for (std::size_t i = 2; i < f.size(); ++i) {
      const auto x = detail::parse_double(f[i].text);
      if (!x || !std::isfinite(*x)) {
        throw parse_error(path, line_no, f[i].column, "invalid number '" + std::string(f[i].text) + "'");
      }
      v.push_back(*x);
    }
    if (!dim) dim = v.size();
    if (v.size() != *dim) throw parse_error(path, line_no, 1, "dimension mismatch");
    auto& slot = side == "src" ? src : tgt;
    if (!slot.emplace(*idx, std::move(v)).second) {
      throw parse_error(path, line_no, 1, "duplicate " + std::string(side) + " for pair " + std::to_string(*idx));
    }
  }
  AlignedBatch batch;
  batch.temperature = temperature;
  for (std::size_t i = 0; i < src.size() || i < tgt.size(); ++i) {
    const auto s = src.find(i);
    const auto t = tgt.find(i);
    if (s == src.end() || t == tgt.end()) {
      throw validation_error(path + ": pair " + std::to_string(i) + " lacks a src or tgt row");
    }
    batch.source.push_back(s->second);
    batch.target.push_back(t->second);
  }
  return batch;
}

}  // namespace langsel
