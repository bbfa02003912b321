#pragma once

// Trajectory datasets, the rolling online window and the data Gramians that
// encode the class of systems consistent with a dataset.

#include <datalmi/io.hpp>
#include <datalmi/linalg.hpp>

#include <nlohmann/json.hpp>

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace datalmi {

inline constexpr double kDefaultRankTol = 1e-8;

/// Raised when a triplet (or a matrix) has the wrong shape. `index` is the
/// offending triplet, or -1 when the error is not tied to one.
class DimensionError : public std::invalid_argument {
 public:
  DimensionError(const std::string& what, long index = -1)
      : std::invalid_argument(what), index_(index) {}
  long index() const { return index_; }

 private:
  long index_;
};

class NotIdentifiableError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Triplet {
  Vector x_prev;
  Vector u_prev;
  Vector x_next;
};

struct SystemPair {
  Matrix A;
  Matrix B;

  int state_dim() const { return static_cast<int>(A.rows()); }
  int input_dim() const { return static_cast<int>(B.cols()); }
  Matrix closed_loop(const Matrix& K) const { return A + B * K; }
};

/// Column-aligned (X+, X-, U-) with one column per sample, oldest first.
class TrajectoryDataset {
 public:
  TrajectoryDataset(Matrix x_plus, Matrix x_minus, Matrix u_minus)
      : x_plus_(std::move(x_plus)), x_minus_(std::move(x_minus)), u_minus_(std::move(u_minus)) {
    if (x_plus_.cols() < 1) throw DimensionError("dataset must hold at least one sample");
    if (x_minus_.cols() != x_plus_.cols() || u_minus_.cols() != x_plus_.cols())
      throw DimensionError("X+, X- and U- must share their column count");
    if (x_minus_.rows() != x_plus_.rows())
      throw DimensionError("X+ and X- must have the same number of rows");
    if (x_plus_.rows() < 1 || u_minus_.rows() < 1)
      throw DimensionError("state and input dimensions must be positive");
  }

  const Matrix& x_plus() const { return x_plus_; }
  const Matrix& x_minus() const { return x_minus_; }
  const Matrix& u_minus() const { return u_minus_; }
  int length() const { return static_cast<int>(x_plus_.cols()); }
  int state_dim() const { return static_cast<int>(x_plus_.rows()); }
  int input_dim() const { return static_cast<int>(u_minus_.rows()); }

  /// S = [X+; -X-; -U-], the (2n+m) x T stack whose left kernel holds [I A B].
  Matrix stacked() const {
    const int n = state_dim(), m = input_dim();
    Matrix s(2 * n + m, length());
    s << x_plus_, -x_minus_, -u_minus_;
    return s;
  }

  Matrix regressor() const {
    Matrix z(state_dim() + input_dim(), length());
    z << x_minus_, u_minus_;
    return z;
  }

  Triplet sample(int j) const { return {x_minus_.col(j), u_minus_.col(j), x_plus_.col(j)}; }

 private:
  Matrix x_plus_;
  Matrix x_minus_;
  Matrix u_minus_;
};

inline TrajectoryDataset build_dataset(const std::vector<Triplet>& triplets) {
  if (triplets.empty()) throw DimensionError("build_dataset: empty triplet list");
  const auto n = triplets.front().x_prev.size();
  const auto m = triplets.front().u_prev.size();
  if (n == 0 || m == 0) throw DimensionError("build_dataset: zero-sized state or input", 0);
  const auto T = static_cast<Eigen::Index>(triplets.size());
  Matrix xp(n, T), xm(n, T), um(m, T);
  for (Eigen::Index j = 0; j < T; ++j) {
    const auto& t = triplets[static_cast<std::size_t>(j)];
    if (t.x_prev.size() != n || t.x_next.size() != n || t.u_prev.size() != m)
      throw DimensionError("build_dataset: triplet " + std::to_string(j) + " has inconsistent dimensions",
                           static_cast<long>(j));
    xm.col(j) = t.x_prev;
    um.col(j) = t.u_prev;
    xp.col(j) = t.x_next;
  }
  return {std::move(xp), std::move(xm), std::move(um)};
}

/// Fixed-capacity window holding the most recent triplets, oldest first.
class RollingWindow {
 public:
  explicit RollingWindow(int capacity) : capacity_(capacity) {
    if (capacity < 1) throw std::invalid_argument("RollingWindow: capacity must be positive");
  }

  int capacity() const { return capacity_; }
  int length() const { return static_cast<int>(samples_.size()); }
  bool full() const { return length() == capacity_; }
  bool empty() const { return samples_.empty(); }

  /// The buffered samples as a dataset. Throws when nothing has been pushed yet.
  TrajectoryDataset dataset() const {
    if (samples_.empty()) throw std::logic_error("RollingWindow: insufficient data");
    return build_dataset(samples_);
  }

  RollingWindow pushed(const Vector& x_prev, const Vector& u_prev, const Vector& x_next) const {
    if (!samples_.empty()) {
      const auto& f = samples_.front();
      if (x_prev.size() != f.x_prev.size() || x_next.size() != f.x_prev.size() ||
          u_prev.size() != f.u_prev.size())
        throw DimensionError("RollingWindow: sample dimensions do not match the buffer",
                             static_cast<long>(samples_.size()));
    } else if (x_prev.size() != x_next.size()) {
      throw DimensionError("RollingWindow: x_prev and x_next differ in size", 0);
    }
    RollingWindow out = *this;
    out.samples_.push_back({x_prev, u_prev, x_next});
    if (out.length() > capacity_) out.samples_.erase(out.samples_.begin());
    return out;
  }

  const std::vector<Triplet>& samples() const { return samples_; }

 private:
  int capacity_;
  std::vector<Triplet> samples_;
};

inline RollingWindow push_sample(const RollingWindow& window, const Vector& x_prev, const Vector& u_prev,
                                 const Vector& x_next) {
  return window.pushed(x_prev, u_prev, x_next);
}

struct ConsistencyGram {
  Matrix gram;  // N = -S S^T, (2n+m) square, negative semidefinite
  int source_length = 0;
  int stack_rank = 0;
  int state_dim = 0;
  int input_dim = 0;
  // Columns z with z^T [X-; U-] = 0: the directions along which the data leave (A, B) free.
  Matrix null_directions;

  int size() const { return static_cast<int>(gram.rows()); }
};

inline ConsistencyGram consistency_gram(const TrajectoryDataset& ds, double rank_tol = kDefaultRankTol) {
  const Matrix s = ds.stacked();
  ConsistencyGram g;
  g.gram = symmetrize(-(s * s.transpose()));
  g.source_length = ds.length();
  g.stack_rank = numerical_rank(s, rank_tol);
  g.state_dim = ds.state_dim();
  g.input_dim = ds.input_dim();
  g.null_directions = left_null_space(ds.regressor(), rank_tol);
  return g;
}

/// ||[I A B] [X+; -X-; -U-]||_F; zero exactly when (A, B) explains every sample.
inline double consistency_residual(const TrajectoryDataset& ds, const SystemPair& sys) {
  if (sys.A.rows() != ds.state_dim() || sys.A.cols() != ds.state_dim() || sys.B.rows() != ds.state_dim() ||
      sys.B.cols() != ds.input_dim())
    throw DimensionError("consistency_residual: system and dataset dimensions differ");
  return (ds.x_plus() - sys.A * ds.x_minus() - sys.B * ds.u_minus()).norm();
}

enum class Identifiability { identifiable, not_identifiable };

struct InformativityReport {
  Identifiability verdict = Identifiability::not_identifiable;
  int rank = 0;
  int required_rank = 0;
  Vector singular_values;

  bool identifiable() const { return verdict == Identifiability::identifiable; }
};

/// Persistent-excitation test: rank [X-; U-] == n + m.
inline InformativityReport informativity_for_identification(const TrajectoryDataset& ds,
                                                            double rank_tol = kDefaultRankTol) {
  const Matrix z = ds.regressor();
  Eigen::JacobiSVD<Matrix> svd(z);
  InformativityReport r;
  r.singular_values = svd.singularValues();
  r.required_rank = ds.state_dim() + ds.input_dim();
  r.rank = numerical_rank(z, rank_tol);
  r.verdict = r.rank == r.required_rank ? Identifiability::identifiable : Identifiability::not_identifiable;
  return r;
}

/// Least-squares [A B] = X+ [X-; U-]^+ ; only defined for identifiable data.
inline SystemPair identify_system(const TrajectoryDataset& ds, double rank_tol = kDefaultRankTol) {
  const auto info = informativity_for_identification(ds, rank_tol);
  if (!info.identifiable())
    throw NotIdentifiableError("identify_system: rank [X-; U-] = " + std::to_string(info.rank) + " < " +
                               std::to_string(info.required_rank) +
                               "; the data only define a consistency class, use the Gramian path");
  const int n = ds.state_dim();
  const int m = ds.input_dim();
  const Matrix z = ds.regressor();
  // Solve z^T [A B]^T = X+^T column by column.
  const Matrix ab_t = z.transpose().colPivHouseholderQr().solve(ds.x_plus().transpose());
  const Matrix ab = ab_t.transpose();
  return {ab.leftCols(n), ab.rightCols(m)};
}

/// Relative least-squares misfit ||X+ - [A B][X-;U-]|| / ||X+|| with the
/// minimum-norm fit; nonzero means no linear system explains the samples.
inline double relative_fit_residual(const TrajectoryDataset& ds) {
  const Matrix z = ds.regressor();
  const Matrix ab_t = z.transpose().completeOrthogonalDecomposition().solve(ds.x_plus().transpose());
  const double denom = ds.x_plus().norm();
  const double res = (ds.x_plus() - ab_t.transpose() * z).norm();
  if (denom == 0.0) return res;
  return res / denom;
}

// ---------------------------------------------------------------------------
// CSV and manifest I/O

inline void write_dataset_csv(std::ostream& os, const TrajectoryDataset& ds) {
  const int n = ds.state_dim(), m = ds.input_dim();
  os << "k";
  for (int i = 1; i <= n; ++i) os << ",x" << i;
  for (int i = 1; i <= m; ++i) os << ",u" << i;
  for (int i = 1; i <= n; ++i) os << ",xnext" << i;
  os << "\n";
  for (int j = 0; j < ds.length(); ++j) {
    os << j;
    for (int i = 0; i < n; ++i) os << ',' << io::format_double(ds.x_minus()(i, j));
    for (int i = 0; i < m; ++i) os << ',' << io::format_double(ds.u_minus()(i, j));
    for (int i = 0; i < n; ++i) os << ',' << io::format_double(ds.x_plus()(i, j));
    os << "\n";
  }
}

inline void write_dataset_csv(const std::filesystem::path& path, const TrajectoryDataset& ds) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  write_dataset_csv(f, ds);
}

inline TrajectoryDataset read_dataset_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("dataset CSV: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = io::split(line, ',');
  if (header.empty() || header[0] != "k") throw std::invalid_argument("dataset CSV: header must start with 'k'");
  int n = 0, m = 0, nn = 0;
  for (std::size_t c = 1; c < header.size(); ++c) {
    const std::string expected_x = "x" + std::to_string(n + 1);
    const std::string expected_u = "u" + std::to_string(m + 1);
    const std::string expected_xn = "xnext" + std::to_string(nn + 1);
    if (m == 0 && nn == 0 && header[c] == expected_x)
      ++n;
    else if (nn == 0 && header[c] == expected_u)
      ++m;
    else if (header[c] == expected_xn)
      ++nn;
    else
      throw std::invalid_argument("dataset CSV: unexpected column '" + std::string(header[c]) + "'");
  }
  if (n == 0 || m == 0 || nn != n) throw std::invalid_argument("dataset CSV: header does not describe x, u, xnext");

  std::vector<Triplet> triplets;
  long row = 0;
  while (std::getline(is, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = io::split(line, ',');
    if (cells.size() != header.size())
      throw DimensionError("dataset CSV: row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                               " cells, expected " + std::to_string(header.size()),
                           static_cast<long>(triplets.size()));
    Triplet t{Vector(n), Vector(m), Vector(n)};
    std::size_t c = 1;
    for (int i = 0; i < n; ++i) t.x_prev(i) = io::parse_double(cells[c++]);
    for (int i = 0; i < m; ++i) t.u_prev(i) = io::parse_double(cells[c++]);
    for (int i = 0; i < n; ++i) t.x_next(i) = io::parse_double(cells[c++]);
    triplets.push_back(std::move(t));
  }
  return build_dataset(triplets);
}

inline TrajectoryDataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  return read_dataset_csv(f);
}

struct DatasetManifest {
  int n = 0;
  int m = 0;
  std::vector<std::filesystem::path> files;
};

inline DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  const auto j = nlohmann::json::parse(f);
  DatasetManifest man;
  man.n = j.at("n").get<int>();
  man.m = j.at("m").get<int>();
  for (const auto& entry : j.at("datasets")) {
    std::filesystem::path p = entry.get<std::string>();
    if (p.is_relative()) p = path.parent_path() / p;
    man.files.push_back(p);
  }
  if (man.files.empty()) throw std::invalid_argument("manifest lists no datasets");
  return man;
}

inline void write_manifest(const std::filesystem::path& path, int n, int m, const std::vector<std::string>& files) {
  nlohmann::json j;
  j["n"] = n;
  j["m"] = m;
  j["datasets"] = files;
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << j.dump(2) << "\n";
}

inline std::vector<TrajectoryDataset> load_manifest_datasets(const std::filesystem::path& path) {
  const auto man = read_manifest(path);
  std::vector<TrajectoryDataset> out;
  for (const auto& file : man.files) {
    auto ds = read_dataset_csv(file);
    if (ds.state_dim() != man.n || ds.input_dim() != man.m)
      throw DimensionError("dataset " + file.string() + " does not match manifest dimensions");
    out.push_back(std::move(ds));
  }
  return out;
}

}  // namespace datalmi
