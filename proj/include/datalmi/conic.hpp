#pragma once

// Solver-agnostic affine LMI problems: every block is C + sum_i y_i A_i >= margin * D
// (D a 0/1 diagonal mask), the objective is c^T y.

#include <datalmi/io.hpp>
#include <datalmi/linalg.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace datalmi {

/// A matrix-valued affine function of the decision vector.
class AffineMatrix {
 public:
  AffineMatrix() = default;
  AffineMatrix(int rows, int cols) : constant_(Matrix::Zero(rows, cols)) {}
  explicit AffineMatrix(Matrix constant) : constant_(std::move(constant)) {}

  static AffineMatrix variable(int rows, int cols, int index, Matrix coefficient) {
    AffineMatrix a(rows, cols);
    a.coeffs_.emplace(index, std::move(coefficient));
    return a;
  }

  int rows() const { return static_cast<int>(constant_.rows()); }
  int cols() const { return static_cast<int>(constant_.cols()); }
  const Matrix& constant() const { return constant_; }
  const std::map<int, Matrix>& coefficients() const { return coeffs_; }

  Matrix evaluate(const Vector& y) const {
    Matrix out = constant_;
    for (const auto& [i, c] : coeffs_) out += y(i) * c;
    return out;
  }

  AffineMatrix transpose() const {
    AffineMatrix t(constant_.transpose());
    for (const auto& [i, c] : coeffs_) t.coeffs_.emplace(i, c.transpose());
    return t;
  }

  AffineMatrix& operator+=(const AffineMatrix& o) {
    check_same_shape(o);
    constant_ += o.constant_;
    for (const auto& [i, c] : o.coeffs_) {
      auto it = coeffs_.find(i);
      if (it == coeffs_.end())
        coeffs_.emplace(i, c);
      else
        it->second += c;
    }
    return *this;
  }

  friend AffineMatrix operator+(AffineMatrix a, const AffineMatrix& b) { return a += b; }
  friend AffineMatrix operator-(AffineMatrix a, const AffineMatrix& b) { return a += (-1.0) * b; }
  friend AffineMatrix operator-(const AffineMatrix& a) { return (-1.0) * a; }

  friend AffineMatrix operator*(double s, AffineMatrix a) {
    a.constant_ *= s;
    for (auto& [i, c] : a.coeffs_) c *= s;
    return a;
  }

  friend AffineMatrix operator*(const Matrix& left, const AffineMatrix& a) {
    if (left.cols() != a.rows()) throw std::invalid_argument("AffineMatrix: left product shape mismatch");
    AffineMatrix out(left * a.constant_);
    for (const auto& [i, c] : a.coeffs_) out.coeffs_.emplace(i, left * c);
    return out;
  }

  friend AffineMatrix operator*(const AffineMatrix& a, const Matrix& right) {
    if (a.cols() != right.rows()) throw std::invalid_argument("AffineMatrix: right product shape mismatch");
    AffineMatrix out(a.constant_ * right);
    for (const auto& [i, c] : a.coeffs_) out.coeffs_.emplace(i, c * right);
    return out;
  }

  /// Rows of `top` followed by rows of `bottom`.
  static AffineMatrix vstack(const AffineMatrix& top, const AffineMatrix& bottom) {
    if (top.cols() != bottom.cols()) throw std::invalid_argument("AffineMatrix::vstack: column mismatch");
    const int r1 = top.rows(), r2 = bottom.rows(), c = top.cols();
    AffineMatrix out(r1 + r2, c);
    out.constant_.topRows(r1) = top.constant_;
    out.constant_.bottomRows(r2) = bottom.constant_;
    auto place = [&](const AffineMatrix& src, int row0) {
      for (const auto& [i, m] : src.coeffs_) {
        auto it = out.coeffs_.try_emplace(i, Matrix::Zero(r1 + r2, c)).first;
        it->second.middleRows(row0, m.rows()) += m;
      }
    };
    place(top, 0);
    place(bottom, r1);
    return out;
  }

 private:
  void check_same_shape(const AffineMatrix& o) const {
    if (o.rows() != rows() || o.cols() != cols())
      throw std::invalid_argument("AffineMatrix: shape mismatch in sum");
  }

  Matrix constant_;
  std::map<int, Matrix> coeffs_;
};

struct LmiBlock {
  std::string label;
  Matrix constant;
  std::vector<std::pair<int, Matrix>> coefficients;  // sorted by variable index
  double margin = 0.0;
  Vector margin_mask;  // diagonal of D; empty means no margin
  // Optional exposing vectors: columns w with w^T (C - margin D) w = 0 and
  // w^T A_i w = 0 for every i, so every feasible point has block(y) w = 0.
  // Solvers may use them for facial reduction; they do not change the set.
  Matrix face;

  int size() const { return static_cast<int>(constant.rows()); }

  Matrix evaluate(const Vector& y) const {
    Matrix out = constant;
    for (const auto& [i, c] : coefficients) out += y(i) * c;
    return out;
  }

  Matrix margin_matrix() const {
    if (margin_mask.size() == 0 || margin == 0.0) return Matrix::Zero(size(), size());
    return Matrix(margin * margin_mask.asDiagonal());
  }

  /// The constant with the strictness margin moved to the left-hand side.
  Matrix effective_constant() const { return constant - margin_matrix(); }

  /// Smallest eigenvalue of evaluate(y) - margin * D.
  double slack(const Vector& y) const { return min_eigenvalue(evaluate(y) - margin_matrix()); }

  double scale() const {
    double s = constant.norm();
    for (const auto& [i, c] : coefficients) s = std::max(s, c.norm());
    return s;
  }
};

/// Assembles a symmetric block from a grid of affine sub-blocks.
class BlockBuilder {
 public:
  explicit BlockBuilder(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    offsets_.push_back(0);
    for (int s : sizes_) offsets_.push_back(offsets_.back() + s);
    total_ = AffineMatrix(offsets_.back(), offsets_.back());
  }

  int size() const { return offsets_.back(); }
  int offset(int block) const { return offsets_.at(static_cast<std::size_t>(block)); }

  /// Places `value` at (row, col) and its transpose at (col, row).
  BlockBuilder& set(int row, int col, const AffineMatrix& value) {
    const auto r = static_cast<std::size_t>(row), c = static_cast<std::size_t>(col);
    if (value.rows() != sizes_.at(r) || value.cols() != sizes_.at(c))
      throw std::invalid_argument("BlockBuilder: sub-block (" + std::to_string(row) + "," + std::to_string(col) +
                                  ") has the wrong shape");
    add_at(offsets_[r], offsets_[c], value);
    if (row != col) add_at(offsets_[c], offsets_[r], value.transpose());
    return *this;
  }

  LmiBlock build(std::string label, double margin = 0.0, Vector margin_mask = {}) const {
    LmiBlock b;
    b.label = std::move(label);
    b.constant = symmetrize(total_.constant());
    for (const auto& [i, c] : total_.coefficients()) {
      if (c.cwiseAbs().maxCoeff() == 0.0) continue;
      b.coefficients.emplace_back(i, symmetrize(c));
    }
    b.margin = margin;
    b.margin_mask = std::move(margin_mask);
    return b;
  }

 private:
  void add_at(int r0, int c0, const AffineMatrix& v) {
    AffineMatrix placed(total_.rows(), total_.cols());
    Matrix k = Matrix::Zero(total_.rows(), total_.cols());
    k.block(r0, c0, v.rows(), v.cols()) = v.constant();
    AffineMatrix out(k);
    for (const auto& [i, c] : v.coefficients()) {
      Matrix ck = Matrix::Zero(total_.rows(), total_.cols());
      ck.block(r0, c0, c.rows(), c.cols()) = c;
      out += AffineMatrix::variable(total_.rows(), total_.cols(), i, ck);
    }
    total_ += out;
  }

  std::vector<int> sizes_;
  std::vector<int> offsets_;
  AffineMatrix total_;
};

struct ConicProblem {
  std::vector<std::string> variable_names;
  std::vector<LmiBlock> blocks;
  Vector objective;  // minimize objective^T y; all zeros for a feasibility problem

  int num_variables() const { return static_cast<int>(variable_names.size()); }
  int num_blocks() const { return static_cast<int>(blocks.size()); }

  int index_of(const std::string& name) const {
    auto it = std::find(variable_names.begin(), variable_names.end(), name);
    if (it == variable_names.end()) throw std::out_of_range("unknown variable '" + name + "'");
    return static_cast<int>(it - variable_names.begin());
  }

  bool has_variable(const std::string& name) const {
    return std::find(variable_names.begin(), variable_names.end(), name) != variable_names.end();
  }

  bool is_feasibility() const { return objective.size() == 0 || objective.cwiseAbs().maxCoeff() == 0.0; }

  /// Smallest slack over all blocks at y (negative means some block is violated).
  double min_slack(const Vector& y) const {
    double s = std::numeric_limits<double>::infinity();
    for (const auto& b : blocks) s = std::min(s, b.slack(y));
    return s;
  }
};

// ---------------------------------------------------------------------------
// SDPA sparse format (.dat-s). The SDPA primal reads X = sum_i F_i x_i - F_0 >= 0,
// so F_0 is the negated effective constant.

inline std::string export_sdpa(const ConicProblem& p) {
  std::ostringstream os;
  os << "\"datalmi conic problem\"\n";
  os << "* variables:";
  for (const auto& v : p.variable_names) os << ' ' << v;
  os << "\n* blocks:";
  for (const auto& b : p.blocks) os << ' ' << (b.label.empty() ? std::string("-") : b.label);
  os << "\n";
  os << p.num_variables() << "\n";
  os << p.num_blocks() << "\n";
  for (int k = 0; k < p.num_blocks(); ++k) os << (k ? " " : "") << p.blocks[static_cast<std::size_t>(k)].size();
  os << "\n";
  for (int i = 0; i < p.num_variables(); ++i)
    os << (i ? " " : "") << io::format_double(p.objective.size() ? p.objective(i) : 0.0);
  os << "\n";

  auto emit = [&os](int matno, int blk, const Matrix& m, double sign) {
    for (int i = 0; i < m.rows(); ++i)
      for (int j = i; j < m.cols(); ++j) {
        const double v = sign * m(i, j);
        if (v == 0.0) continue;
        os << matno << ' ' << blk << ' ' << (i + 1) << ' ' << (j + 1) << ' ' << io::format_double(v) << "\n";
      }
  };
  for (int b = 0; b < p.num_blocks(); ++b) emit(0, b + 1, p.blocks[static_cast<std::size_t>(b)].effective_constant(), -1.0);
  for (int v = 0; v < p.num_variables(); ++v)
    for (int b = 0; b < p.num_blocks(); ++b)
      for (const auto& [idx, c] : p.blocks[static_cast<std::size_t>(b)].coefficients)
        if (idx == v) emit(v + 1, b + 1, c, 1.0);
  return os.str();
}

/// Parses SDPA sparse text. Margins are folded into the constants, so a
/// parsed problem re-exports to the same text.
inline ConicProblem import_sdpa(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::vector<std::string> var_names, block_labels;
  std::vector<std::string> body;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '"' || line[0] == '*') {
      auto grab = [&line](const std::string& key, std::vector<std::string>& out) {
        if (line.rfind(key, 0) != 0) return;
        std::istringstream ls(line.substr(key.size()));
        std::string w;
        while (ls >> w) out.push_back(w);
      };
      grab("* variables:", var_names);
      grab("* blocks:", block_labels);
      continue;
    }
    body.push_back(line);
  }
  std::size_t pos = 0;
  auto next_tokens = [&]() {
    if (pos >= body.size()) throw std::invalid_argument("SDPA: unexpected end of input");
    return io::tokens(body[pos++]);
  };
  auto t = next_tokens();
  const long m = io::parse_long(t.at(0));
  t = next_tokens();
  const long nblocks = io::parse_long(t.at(0));
  if (m < 0 || nblocks < 1) throw std::invalid_argument("SDPA: bad header counts");

  std::vector<int> sizes;
  std::vector<bool> diagonal;
  while (static_cast<long>(sizes.size()) < nblocks) {
    for (auto tok : next_tokens()) {
      const long s = io::parse_long(tok);
      sizes.push_back(static_cast<int>(std::labs(s)));
      diagonal.push_back(s < 0);
    }
  }
  if (static_cast<long>(sizes.size()) != nblocks) throw std::invalid_argument("SDPA: block structure length mismatch");

  Vector c(m);
  long filled = 0;
  while (filled < m) {
    for (auto tok : next_tokens()) {
      if (filled >= m) throw std::invalid_argument("SDPA: too many objective entries");
      c(filled++) = io::parse_double(tok);
    }
  }

  ConicProblem p;
  p.objective = c;
  for (long i = 0; i < m; ++i)
    p.variable_names.push_back(static_cast<long>(var_names.size()) == m ? var_names[static_cast<std::size_t>(i)]
                                                                         : "y" + std::to_string(i + 1));
  std::vector<std::map<int, Matrix>> coeff(static_cast<std::size_t>(nblocks));
  std::vector<Matrix> f0(static_cast<std::size_t>(nblocks));
  for (long b = 0; b < nblocks; ++b) f0[static_cast<std::size_t>(b)] = Matrix::Zero(sizes[static_cast<std::size_t>(b)], sizes[static_cast<std::size_t>(b)]);

  for (; pos < body.size(); ++pos) {
    auto e = io::tokens(body[pos]);
    if (e.empty()) continue;
    if (e.size() != 5) throw std::invalid_argument("SDPA: entry line must have 5 fields: " + body[pos]);
    const long matno = io::parse_long(e[0]);
    const long blk = io::parse_long(e[1]) - 1;
    const long i = io::parse_long(e[2]) - 1;
    const long j = io::parse_long(e[3]) - 1;
    const double v = io::parse_double(e[4]);
    if (matno < 0 || matno > m || blk < 0 || blk >= nblocks) throw std::invalid_argument("SDPA: index out of range");
    const int sz = sizes[static_cast<std::size_t>(blk)];
    if (i < 0 || j < 0 || i >= sz || j >= sz) throw std::invalid_argument("SDPA: entry outside its block");
    Matrix* target;
    if (matno == 0) {
      target = &f0[static_cast<std::size_t>(blk)];
    } else {
      auto& mp = coeff[static_cast<std::size_t>(blk)];
      target = &mp.try_emplace(static_cast<int>(matno - 1), Matrix::Zero(sz, sz)).first->second;
    }
    (*target)(i, j) = v;
    (*target)(j, i) = v;
  }
  for (long b = 0; b < nblocks; ++b) {
    LmiBlock blk;
    blk.label = static_cast<long>(block_labels.size()) == nblocks ? block_labels[static_cast<std::size_t>(b)] : "";
    if (blk.label == "-") blk.label.clear();
    blk.constant = -f0[static_cast<std::size_t>(b)];
    for (auto& [i, mtx] : coeff[static_cast<std::size_t>(b)]) blk.coefficients.emplace_back(i, std::move(mtx));
    p.blocks.push_back(std::move(blk));
  }
  return p;
}

}  // namespace datalmi
