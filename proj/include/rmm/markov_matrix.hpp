#pragma once

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "rmm/dense.hpp"
#include "rmm/error.hpp"

namespace rmm {

/// Absolute per-row tolerance on unit row sums.
inline constexpr double row_tol = 1e-12;

namespace detail {

inline void check_finite_nonnegative(std::span<const double> values) {
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!std::isfinite(values[k]))
      throw Error(ErrorCode::NonFinite, "entry " + std::to_string(k) + " is not finite");
    if (values[k] < 0.0)
      throw Error(ErrorCode::NegativeEntry, "entry " + std::to_string(k) + " is negative");
  }
}

// Rows whose sum differs from one by no more than the rounding of a
// d-term summation are left untouched, so exactly serialized matrices
// round-trip bit for bit.
inline double sum_rounding_slack(std::size_t n) {
  return 4.0 * static_cast<double>(n) * std::numeric_limits<double>::epsilon();
}

inline double row_sum(std::span<const double> r) {
  double s = 0.0;
  for (double v : r) s += v;
  return s;
}

}  // namespace detail

//-----------------------------------------------------------------------------
/// Dense row-stochastic matrix: non-negative entries, every row summing to
/// one within `row_tol`. Immutable once constructed.
class MarkovMatrix {
 public:
  /// Validates and, where a row sum is off by more than summation rounding
  /// but within `row_tol`, renormalizes that row.
  static MarkovMatrix from_rows(const std::vector<std::vector<double>>& rows) {
    const std::size_t d = rows.size();
    if (d == 0) throw Error(ErrorCode::NonSquare, "matrix has no rows");
    Matrix<double> m(d, d);
    for (std::size_t i = 0; i < d; ++i) {
      if (rows[i].size() != d)
        throw Error(ErrorCode::NonSquare, "row " + std::to_string(i) + " has " +
                                              std::to_string(rows[i].size()) +
                                              " entries, expected " + std::to_string(d));
      std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
    }
    return from_matrix(std::move(m), true);
  }

  /// Adopts an already-normalized matrix (e.g. a sampled one); rows are
  /// validated but never rescaled.
  static MarkovMatrix adopt(Matrix<double> m) { return from_matrix(std::move(m), false); }

  /// Same as from_rows but for a matrix already in dense storage.
  static MarkovMatrix from_matrix(Matrix<double> m, bool renormalize = true) {
    if (m.rows() == 0 || !m.square())
      throw Error(ErrorCode::NonSquare, std::to_string(m.rows()) + "x" +
                                            std::to_string(m.cols()) + " is not square");
    detail::check_finite_nonnegative(m.data());
    const std::size_t d = m.rows();
    std::size_t worst = 0;
    double worst_dev = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double dev = detail::row_sum(m.row(i)) - 1.0;
      if (std::abs(dev) > std::abs(worst_dev)) {
        worst = i;
        worst_dev = dev;
      }
    }
    if (std::abs(worst_dev) > row_tol) throw RowSumError(worst, worst_dev);
    if (renormalize) {
      for (std::size_t i = 0; i < d; ++i) {
        auto r = m.row(i);
        const double s = detail::row_sum(r);
        if (std::abs(s - 1.0) > detail::sum_rounding_slack(d))
          for (double& v : r) v /= s;
      }
    }
    return MarkovMatrix(std::move(m));
  }

  /// All entries 1/d.
  static MarkovMatrix uniform(std::size_t d) {
    if (d == 0) throw Error(ErrorCode::InvalidArgument, "dimension must be >= 1");
    return MarkovMatrix(Matrix<double>(d, d, 1.0 / static_cast<double>(d)));
  }

  /// Entry (i, perm[i]) = 1, all others 0.
  static MarkovMatrix permutation(std::span<const std::size_t> perm) {
    const std::size_t d = perm.size();
    if (d == 0) throw Error(ErrorCode::NotABijection, "empty permutation");
    std::vector<bool> seen(d, false);
    for (std::size_t i = 0; i < d; ++i) {
      if (perm[i] >= d || seen[perm[i]])
        throw Error(ErrorCode::NotABijection,
                    "image " + std::to_string(perm[i]) + " at position " +
                        std::to_string(i) + " is out of range or repeated");
      seen[perm[i]] = true;
    }
    Matrix<double> m(d, d);
    for (std::size_t i = 0; i < d; ++i) m(i, perm[i]) = 1.0;
    return MarkovMatrix(std::move(m));
  }

  static MarkovMatrix identity(std::size_t d) {
    if (d == 0) throw Error(ErrorCode::InvalidArgument, "dimension must be >= 1");
    return MarkovMatrix(Matrix<double>::identity(d));
  }

  [[nodiscard]] std::size_t dim() const noexcept { return m_.rows(); }
  [[nodiscard]] double operator()(std::size_t i, std::size_t j) const noexcept {
    return m_(i, j);
  }
  [[nodiscard]] std::span<const double> row(std::size_t i) const noexcept { return m_.row(i); }
  [[nodiscard]] std::span<const double> entries() const noexcept { return m_.data(); }
  [[nodiscard]] const Matrix<double>& matrix() const noexcept { return m_; }

  [[nodiscard]] std::vector<std::vector<double>> rows() const {
    std::vector<std::vector<double>> out(dim());
    for (std::size_t i = 0; i < dim(); ++i) out[i].assign(row(i).begin(), row(i).end());
    return out;
  }

  friend bool operator==(const MarkovMatrix&, const MarkovMatrix&) = default;

 private:
  explicit MarkovMatrix(Matrix<double> m) : m_(std::move(m)) {}

  Matrix<double> m_;
};

//-----------------------------------------------------------------------------
/// Non-negative weights summing to one within `row_tol`.
class ProbabilityVector {
 public:
  explicit ProbabilityVector(std::vector<double> weights) : w_(std::move(weights)) {
    if (w_.empty()) throw Error(ErrorCode::InvalidArgument, "empty probability vector");
    detail::check_finite_nonnegative(w_);
    const double dev = detail::row_sum(w_) - 1.0;
    if (std::abs(dev) > row_tol) throw RowSumError(0, dev);
  }

  static ProbabilityVector uniform(std::size_t d) {
    return ProbabilityVector(std::vector<double>(d, 1.0 / static_cast<double>(d)));
  }

  static ProbabilityVector point_mass(std::size_t d, std::size_t state) {
    std::vector<double> w(d, 0.0);
    if (state >= d) throw Error(ErrorCode::InvalidArgument, "state out of range");
    w[state] = 1.0;
    return ProbabilityVector(std::move(w));
  }

  [[nodiscard]] std::size_t dim() const noexcept { return w_.size(); }
  [[nodiscard]] std::span<const double> weights() const noexcept { return w_; }
  [[nodiscard]] double operator[](std::size_t i) const noexcept { return w_[i]; }

  friend bool operator==(const ProbabilityVector&, const ProbabilityVector&) = default;

 private:
  std::vector<double> w_;
};

/// p(t)^T = p^T M^t, evaluated as t successive vector-matrix products.
inline ProbabilityVector propagate(const ProbabilityVector& p, const MarkovMatrix& m,
                                   std::size_t t) {
  if (p.dim() != m.dim())
    throw Error(ErrorCode::DimensionMismatch, "vector has dimension " +
                                                  std::to_string(p.dim()) + ", matrix " +
                                                  std::to_string(m.dim()));
  if (t == 0) return p;
  std::vector<double> cur(p.weights().begin(), p.weights().end());
  std::vector<double> next(cur.size());
  for (std::size_t step = 0; step < t; ++step) {
    multiply_left<double>(cur, m.matrix(), next);
    cur.swap(next);
  }
  return ProbabilityVector(std::move(cur));
}

//-----------------------------------------------------------------------------
// CSV interchange: one matrix row per line, 17 significant digits, optional
// leading "# markov d=<dim>" header.

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& token) {
  const char* begin = token.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  while (end && (*end == ' ' || *end == '\t' || *end == '\r')) ++end;
  if (end == begin || (end && *end != '\0'))
    throw Error(ErrorCode::IoError, "cannot parse number '" + token + "'");
  return v;
}

inline void write_matrix_csv(std::ostream& out, const Matrix<double>& m,
                             std::string_view kind = "markov") {
  out << "# " << kind << " d=" << m.rows() << '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

inline void write_matrix_csv(std::ostream& out, const MarkovMatrix& m) {
  write_matrix_csv(out, m.matrix(), "markov");
}

/// Reads a square CSV matrix. A "d=<dim>" header, when present, must agree
/// with the data.
inline Matrix<double> read_matrix_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  long long declared = -1;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto pos = line.find("d=");
      if (pos != std::string::npos) declared = std::atoll(line.c_str() + pos + 2);
      continue;
    }
    std::vector<double> r;
    std::stringstream ss(line);
    std::string token;
    while (std::getline(ss, token, ',')) r.push_back(parse_double(token));
    rows.push_back(std::move(r));
  }
  const std::size_t d = rows.size();
  if (d == 0) throw Error(ErrorCode::IoError, "no matrix rows found");
  if (declared >= 0 && static_cast<std::size_t>(declared) != d)
    throw Error(ErrorCode::NonSquare, "header declares d=" + std::to_string(declared) +
                                          " but found " + std::to_string(d) + " rows");
  Matrix<double> m(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    if (rows[i].size() != d)
      throw Error(ErrorCode::NonSquare,
                  "row " + std::to_string(i) + " has " + std::to_string(rows[i].size()) +
                      " entries, expected " + std::to_string(d));
    std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
  }
  return m;
}

}  // namespace rmm
