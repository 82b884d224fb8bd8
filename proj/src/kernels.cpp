#include "vmbo/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/SparseCholesky>

#include "vmbo/errors.hpp"

namespace vmbo {

namespace {

using ColMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

constexpr double flag_tolerance = 1e-8;

SparseMatrix sparse_identity(Index n) {
  SparseMatrix id(static_cast<int>(n), static_cast<int>(n));
  id.setIdentity();
  return id;
}

void verify_declared(const DiffusionKernel& a) {
  const auto rep = probe_kernel(a);
  const auto& f = a.flags();
  std::ostringstream msg;
  if (f.symmetric && rep.symmetry_error > flag_tolerance) msg << " symmetry error " << rep.symmetry_error;
  if (f.conserves_mass && rep.mass_error > flag_tolerance) msg << " mass error " << rep.mass_error;
  if (f.positive_semidefinite && rep.min_quadratic_form < -flag_tolerance)
    msg << " negative quadratic form " << rep.min_quadratic_form;
  if (!msg.str().empty()) fail(ErrorKind::numerical, a.id() + " fails its declared flags:" + msg.str());
}

std::vector<Eigen::Triplet<double>> sorted(std::vector<Eigen::Triplet<double>> e) {
  std::sort(e.begin(), e.end(), [](const auto& a, const auto& b) {
    if (a.col() != b.col()) return a.col() < b.col();
    if (a.row() != b.row()) return a.row() < b.row();
    return a.value() < b.value();
  });
  return e;
}

}  // namespace

const char* to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::rank_k_heat: return "rank_k_heat";
    case KernelKind::positive_taylor: return "positive_taylor";
    case KernelKind::squared_rw: return "squared_rw";
    case KernelKind::squared_rw_twice: return "squared_rw_twice";
    case KernelKind::shifted_squared_rw: return "shifted_squared_rw";
  }
  return "unknown";
}

KernelKind kernel_kind_from_string(const std::string& name) {
  for (auto k : {KernelKind::rank_k_heat, KernelKind::positive_taylor, KernelKind::squared_rw,
                 KernelKind::squared_rw_twice, KernelKind::shifted_squared_rw})
    if (name == to_string(k)) return k;
  fail(ErrorKind::config, "unknown kernel kind '" + name + "'");
}

std::string DiffusionKernel::id() const {
  std::ostringstream os;
  os << to_string(kind_);
  switch (kind_) {
    case KernelKind::rank_k_heat: os << "(K=" << rank_ << ",h=" << h_ << ")"; break;
    case KernelKind::positive_taylor: os << "(J=" << order_ << ",h=" << h_ << ")"; break;
    case KernelKind::shifted_squared_rw: os << "(r=" << shift_ << ")"; break;
    default: break;
  }
  return os.str();
}

MatrixXd DiffusionKernel::multiply(const MatrixXd& x) const {
  if (x.rows() != n_) fail(ErrorKind::parameter, "kernel applied to a matrix with the wrong number of rows");
  switch (kind_) {
    case KernelKind::rank_k_heat: return *basis_ * (decay_.asDiagonal() * (dual_->transpose() * x));
    case KernelKind::squared_rw_twice: return *rows_ * (*rows_ * x);
    case KernelKind::positive_taylor:
      if (!rows_) {
        // Horner: c0 x + R (c1 x + R (c2 x + ...))
        MatrixXd y = coeffs_.back() * x;
        for (std::size_t j = coeffs_.size() - 1; j-- > 0;) y = coeffs_[j] * x + *step_ * y;
        return y;
      }
      [[fallthrough]];
    default: return *rows_ * x;
  }
}

MatrixXd DiffusionKernel::multiply_sparse(const std::vector<Eigen::Triplet<double>>& entries, Index cols) const {
  const auto e = sorted(entries);
  for (const auto& t : e)
    if (t.row() < 0 || t.row() >= n_ || t.col() < 0 || t.col() >= cols)
      fail(ErrorKind::parameter, "sparse increment entry out of range");
  MatrixXd out = MatrixXd::Zero(n_, cols);
  if (e.empty()) return out;
  switch (kind_) {
    case KernelKind::rank_k_heat: {
      MatrixXd acc = MatrixXd::Zero(rank_, cols);
      for (const auto& t : e) acc.col(t.col()) += t.value() * dual_->row(t.row()).transpose();
      return *basis_ * (decay_.asDiagonal() * acc);
    }
    case KernelKind::positive_taylor:
      if (!cols_) {
        MatrixXd x = MatrixXd::Zero(n_, cols);
        for (const auto& t : e) x(t.row(), t.col()) += t.value();
        return multiply(x);
      }
      break;
    default: break;
  }
  for (const auto& t : e)
    for (ColMatrix::InnerIterator it(*cols_, t.row()); it; ++it) out(it.row(), t.col()) += t.value() * it.value();
  if (kind_ == KernelKind::squared_rw_twice) return *rows_ * out;
  return out;
}

MatrixXd DiffusionKernel::dense() const { return multiply(MatrixXd::Identity(n_, n_)); }

DiffusionKernel make_rank_k_heat(const Spectrum& spec, double h, Index k) {
  if (k < 1 || k > spec.count()) fail(ErrorKind::parameter, "rank K must be in [1, spectrum size]");
  if (!(h >= 0)) fail(ErrorKind::parameter, "h must be nonnegative");
  DiffusionKernel a;
  a.kind_ = KernelKind::rank_k_heat;
  a.h_ = h;
  // h = 0 is the projection onto the retained modes; keep energies finite.
  a.scaling_ = h > 0 ? std::sqrt(h) : 1.0;
  a.n_ = spec.eigenvectors.rows();
  a.rank_ = k;
  a.degrees_ = spec.degrees;
  a.flags_ = {true, InnerProduct::degree, true, true};
  auto basis = std::make_shared<MatrixXd>(spec.eigenvectors.leftCols(k));
  a.dual_ = std::make_shared<MatrixXd>(spec.degrees.asDiagonal() * *basis);
  a.basis_ = std::move(basis);
  a.decay_ = (-h * spec.eigenvalues.head(k).array()).exp().matrix();
  verify_declared(a);
  return a;
}

DiffusionKernel make_positive_taylor(const SparseWeights& w, double h, int order) {
  if (order < 2 || order % 2 != 0) fail(ErrorKind::parameter, "Taylor order J must be even and positive");
  if (!(h > 0)) fail(ErrorKind::parameter, "h must be positive");
  DiffusionKernel a;
  a.kind_ = KernelKind::positive_taylor;
  a.h_ = h;
  a.scaling_ = std::sqrt(h);
  a.n_ = w.size();
  a.order_ = order;
  a.degrees_ = w.degrees;
  a.flags_ = {true, InnerProduct::degree, true, true};
  double term = 1, total = 0;
  for (int j = 0; j <= order; ++j) {
    if (j > 0) term *= h / j;
    a.coeffs_.push_back(term);
    total += term;
  }
  for (double& c : a.coeffs_) c /= total;
  auto step = std::make_shared<SparseMatrix>(random_walk_matrix(w));
  if (order <= 4) {
    SparseMatrix sum = a.coeffs_[0] * sparse_identity(a.n_);
    SparseMatrix power = sparse_identity(a.n_);
    for (int j = 1; j <= order; ++j) {
      power = SparseMatrix(power * *step);
      sum = SparseMatrix(sum + a.coeffs_[static_cast<std::size_t>(j)] * power);
    }
    sum.makeCompressed();
    a.cols_ = std::make_shared<ColMatrix>(sum);
    a.rows_ = std::make_shared<SparseMatrix>(std::move(sum));
  }
  a.step_ = std::move(step);
  verify_declared(a);
  return a;
}

DiffusionKernel make_squared_rw_kernel(const SparseWeights& w, KernelKind kind, double r) {
  DiffusionKernel a;
  a.kind_ = kind;
  a.h_ = 1;
  a.scaling_ = 1;
  a.n_ = w.size();
  a.degrees_ = VectorXd::Ones(a.n_);
  const SparseMatrix p = random_walk_matrix(w);
  SparseMatrix g = SparseMatrix(SparseMatrix(p.transpose()) * p);
  if (kind == KernelKind::shifted_squared_rw) {
    if (!(r >= 0)) fail(ErrorKind::parameter, "shift r must be nonnegative");
    a.shift_ = r;
    g = SparseMatrix(g - r * sparse_identity(a.n_));
  }
  g.makeCompressed();
  a.cols_ = std::make_shared<ColMatrix>(g);
  a.rows_ = std::make_shared<SparseMatrix>(std::move(g));
  a.flags_.symmetric = true;
  a.flags_.inner_product = InnerProduct::plain;
  a.flags_.positive_semidefinite = true;
  if (kind == KernelKind::shifted_squared_rw) a.flags_.positive_semidefinite = r <= squared_rw_min_eigenvalue(w);
  const auto rep = probe_kernel(a);
  a.flags_.conserves_mass = rep.mass_error <= flag_tolerance;
  if (rep.min_quadratic_form < -flag_tolerance) a.flags_.positive_semidefinite = false;
  verify_declared(a);
  return a;
}

DiffusionKernel make_squared_rw(const SparseWeights& w, SquaredVariant variant, double r) {
  switch (variant) {
    case SquaredVariant::plain: return make_squared_rw_kernel(w, KernelKind::squared_rw, 0);
    case SquaredVariant::squared_twice: return make_squared_rw_kernel(w, KernelKind::squared_rw_twice, 0);
    case SquaredVariant::shifted: return make_squared_rw_kernel(w, KernelKind::shifted_squared_rw, r);
  }
  fail(ErrorKind::parameter, "unknown squared random-walk variant");
}

double squared_rw_min_eigenvalue(const SparseWeights& w) {
  const SparseMatrix p = random_walk_matrix(w);
  const ColMatrix g = ColMatrix(SparseMatrix(SparseMatrix(p.transpose()) * p));
  const Index n = g.rows();
  if (n <= 600) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(MatrixXd(g), Eigen::EigenvaluesOnly);
    return es.eigenvalues()[0];
  }
  // Inverse iteration by Lanczos on (G + sigma I)^{-1}; the shift keeps the
  // factorization defined when G is singular.
  const double sigma = 1e-9;
  ColMatrix shifted = g;
  for (Index i = 0; i < n; ++i) shifted.coeffRef(i, i) += sigma;
  Eigen::SimplicialLDLT<ColMatrix> ldlt(shifted);
  if (ldlt.info() != Eigen::Success) fail(ErrorKind::numerical, "factorization of (D^{-1}W)^T D^{-1}W failed");
  LanczosOptions lo;
  lo.tolerance = 1e-12;
  lo.max_subspace = std::min<Index>(n, 200);
  auto op = [&ldlt](const VectorXd& x, VectorXd& y) { y = ldlt.solve(x); };
  const auto pairs = lanczos_largest(op, n, 1, MatrixXd(n, 0), lo);
  return 1.0 / pairs.values[0] - sigma;
}

ProbeReport probe_kernel(const DiffusionKernel& a, int probes, std::uint64_t seed) {
  const Index n = a.size();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  MatrixXd x(n, probes), y(n, probes);
  for (Index i = 0; i < n; ++i)
    for (int c = 0; c < probes; ++c) {
      x(i, c) = dist(rng);
      y(i, c) = dist(rng);
    }
  const VectorXd wts = a.flags().inner_product == InnerProduct::degree ? a.degrees() : VectorXd::Ones(n);
  const MatrixXd ax = a.multiply(x);
  const MatrixXd ay = a.multiply(y);
  ProbeReport rep;
  for (int c = 0; c < probes; ++c) {
    const double lhs = ax.col(c).dot(wts.asDiagonal() * y.col(c));
    const double rhs = x.col(c).dot(wts.asDiagonal() * ay.col(c));
    const double norm = std::max(1e-300, std::abs(lhs) + std::abs(rhs) + ax.col(c).norm() * y.col(c).norm());
    rep.symmetry_error = std::max(rep.symmetry_error, std::abs(lhs - rhs) / norm);
    const double q = x.col(c).dot(wts.asDiagonal() * ax.col(c)) / x.col(c).dot(wts.asDiagonal() * x.col(c));
    rep.min_quadratic_form = c == 0 ? q : std::min(rep.min_quadratic_form, q);
  }
  const MatrixXd ones = MatrixXd::Ones(n, 1);
  rep.mass_error = (a.multiply(ones) - ones).cwiseAbs().maxCoeff();
  return rep;
}

DiffusedLabels apply(const DiffusionKernel& a, const MatrixXd& x) { return {a.multiply(x), a.h(), a.id()}; }

DiffusedLabels apply(const DiffusionKernel& a, const Clustering& c) {
  if (c.size() != a.size()) fail(ErrorKind::parameter, "clustering size does not match the kernel");
  return apply(a, c.one_hot());
}

SparseDelta SparseDelta::between(const Clustering& prev, const Clustering& next) {
  if (prev.size() != next.size() || prev.clusters() != next.clusters())
    fail(ErrorKind::parameter, "clusterings differ in shape");
  SparseDelta d;
  d.rows = prev.size();
  d.cols = prev.clusters();
  for (Index x = 0; x < prev.size(); ++x) {
    if (prev[x] == next[x]) continue;
    d.entries.emplace_back(static_cast<int>(x), prev[x], -1.0);
    d.entries.emplace_back(static_cast<int>(x), next[x], 1.0);
  }
  return d;
}

DiffusedLabels apply_incremental(const DiffusionKernel& a, const DiffusedLabels& prev, const SparseDelta& delta) {
  if (prev.values.rows() != a.size() || delta.rows != a.size() || delta.cols != prev.values.cols())
    fail(ErrorKind::parameter, "incremental diffusion: shape mismatch");
  DiffusedLabels out{prev.values, a.h(), a.id()};
  if (!delta.empty()) out.values += a.multiply_sparse(delta.entries, delta.cols);
  return out;
}

}  // namespace vmbo
