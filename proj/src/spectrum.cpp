#include "vmbo/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "vmbo/errors.hpp"

namespace vmbo {

namespace {

VectorXd random_unit(Index n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  VectorXd v(n);
  for (Index i = 0; i < n; ++i) v[i] = dist(rng);
  return v.normalized();
}

void project_out(VectorXd& w, const MatrixXd& basis, Index cols) {
  if (cols == 0) return;
  w.noalias() -= basis.leftCols(cols) * (basis.leftCols(cols).transpose() * w);
}

}  // namespace

EigenPairs lanczos_largest(const LinearOperator& op, Index n, Index k, const MatrixXd& deflate,
                           const LanczosOptions& opt) {
  const Index dim = n - deflate.cols();
  if (k < 0 || k > dim) fail(ErrorKind::parameter, "lanczos: requested more eigenpairs than the space holds");
  EigenPairs out;
  if (k == 0) {
    out.values.resize(0);
    out.vectors.resize(n, 0);
    out.residuals.resize(0);
    return out;
  }
  const Index mmax = std::min(dim, opt.max_subspace > 0 ? opt.max_subspace : std::max<Index>(6 * k + 300, 600));

  std::mt19937_64 rng(opt.seed);
  MatrixXd q(n, mmax);
  VectorXd alpha(mmax), beta(mmax);
  VectorXd v = random_unit(n, rng);
  for (int pass = 0; pass < 2; ++pass) project_out(v, deflate, deflate.cols());
  v.normalize();

  VectorXd w(n);
  Eigen::SelfAdjointEigenSolver<MatrixXd> tri;
  Index m = 0;
  bool converged = false;
  VectorXd ritz_res;
  std::vector<Index> wanted;
  for (Index j = 0; j < mmax; ++j) {
    q.col(j) = v;
    op(v, w);
    alpha[j] = v.dot(w);
    w -= alpha[j] * v;
    if (j > 0) w -= beta[j - 1] * q.col(j - 1);
    for (int pass = 0; pass < 2; ++pass) {
      project_out(w, q, j + 1);
      project_out(w, deflate, deflate.cols());
    }
    beta[j] = w.norm();
    m = j + 1;

    const bool exhausted = (m == mmax);
    const bool breakdown = beta[j] < 1e-13 * std::max(1.0, std::abs(alpha[j]));
    if (m >= k && (exhausted || breakdown || (m >= k + 20 && (m - k) % 20 == 0))) {
      VectorXd diag = alpha.head(m);
      VectorXd sub = beta.head(std::max<Index>(m - 1, 0));
      tri.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
      wanted.clear();
      for (Index a = 0; a < k; ++a) wanted.push_back(m - 1 - a);
      ritz_res.resize(k);
      bool ok = true;
      for (Index a = 0; a < k; ++a) {
        const Index c = wanted[static_cast<std::size_t>(a)];
        ritz_res[a] = std::abs(beta[j] * tri.eigenvectors()(m - 1, c));
        if (ritz_res[a] > opt.tolerance * std::max(1.0, std::abs(tri.eigenvalues()[c]))) ok = false;
      }
      if (ok || m == dim) {
        converged = true;
        break;
      }
      if (exhausted) break;
    }
    if (breakdown) {
      // Invariant subspace found; continue with a fresh direction.
      v = random_unit(n, rng);
      for (int pass = 0; pass < 2; ++pass) {
        project_out(v, q, m);
        project_out(v, deflate, deflate.cols());
      }
      v.normalize();
      beta[j] = 0;
    } else {
      v = w / beta[j];
    }
  }
  if (!converged && opt.require_convergence) {
    std::ostringstream msg;
    msg << "lanczos did not converge with subspace " << m << "; largest Ritz residual "
        << (ritz_res.size() ? ritz_res.maxCoeff() : -1.0);
    fail(ErrorKind::numerical, msg.str());
  }
  out.values.resize(k);
  out.vectors.resize(n, k);
  out.residuals = ritz_res;
  const MatrixXd basis = q.leftCols(m);
  for (Index a = 0; a < k; ++a) {
    const Index c = wanted[static_cast<std::size_t>(a)];
    out.values[a] = tri.eigenvalues()[c];
    out.vectors.col(a) = (basis * tri.eigenvectors().col(c)).normalized();
  }
  return out;
}

EigenPairs filtered_subspace_largest(const BlockOperator& op, Index n, Index k, const MatrixXd& deflate,
                                     double lower, const FilterOptions& opt) {
  const Index dim = n - deflate.cols();
  if (k < 1 || k > dim) fail(ErrorKind::parameter, "subspace iteration: K must be in [1, dimension]");
  if (opt.degree < 1) fail(ErrorKind::parameter, "subspace iteration: filter degree must be positive");
  const Index p = std::min(dim, k + (opt.guard_vectors > 0 ? opt.guard_vectors : std::max<Index>(20, k / 4)));

  const auto deflate_block = [&](MatrixXd& x) {
    if (deflate.cols() == 0) return;
    for (int pass = 0; pass < 2; ++pass) x.noalias() -= deflate * (deflate.transpose() * x);
  };
  const auto orthonormalize = [&](MatrixXd& x) {
    deflate_block(x);
    Eigen::HouseholderQR<MatrixXd> qr(x);
    x = qr.householderQ() * MatrixXd::Identity(n, x.cols());
    deflate_block(x);
  };

  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  MatrixXd x(n, p);
  for (Index j = 0; j < p; ++j)
    for (Index i = 0; i < n; ++i) x(i, j) = dist(rng);
  orthonormalize(x);

  MatrixXd ax(n, p), y(n, p), prev(n, p), next(n, p);
  VectorXd theta;
  VectorXd res(k);
  bool converged = false;
  for (int it = 0; it < opt.max_iterations; ++it) {
    // Rayleigh-Ritz on the current basis.
    op(x, ax);
    const MatrixXd h = x.transpose() * ax;
    const Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (h + h.transpose()));
    if (es.info() != Eigen::Success) fail(ErrorKind::numerical, "Rayleigh-Ritz eigensolver failed");
    const MatrixXd v = es.eigenvectors().rowwise().reverse();
    theta = es.eigenvalues().reverse();
    x = x * v;
    ax = ax * v;
    double scale = 1.0;
    for (Index a = 0; a < p; ++a) scale = std::max(scale, std::abs(theta[a]));
    converged = true;
    for (Index a = 0; a < k; ++a) {
      res[a] = (ax.col(a) - theta[a] * x.col(a)).norm();
      if (res[a] > opt.tolerance * scale) converged = false;
    }
    if (converged) break;

    // Damp [lower, cut] where cut is the smallest Ritz value of the block.
    const double cut = theta[p - 1];
    const double upper = theta[0];
    if (!(cut > lower) || !(upper > cut)) break;
    const double e = 0.5 * (cut - lower);
    const double c = 0.5 * (cut + lower);
    // Scaled three-term recurrence, normalized to stay O(1) at `upper`.
    double sigma = e / (upper - c);
    const double tau = 2.0 / sigma;
    op(x, y);
    prev = x;
    y = (y - c * x) * (sigma / e);
    for (int d = 2; d <= opt.degree; ++d) {
      const double sigma_next = 1.0 / (tau - sigma);
      op(y, next);
      next = (next - c * y) * (2.0 * sigma_next / e) - (sigma * sigma_next) * prev;
      prev = std::move(y);
      y = std::move(next);
      next.resize(n, p);
      sigma = sigma_next;
    }
    x = std::move(y);
    y.resize(n, p);
    orthonormalize(x);
  }
  if (!converged) {
    std::ostringstream msg;
    msg << "subspace iteration did not converge; largest residual " << res.maxCoeff();
    fail(ErrorKind::numerical, msg.str());
  }
  EigenPairs out;
  out.values = theta.head(k);
  out.vectors = x.leftCols(k);
  out.residuals = res;
  return out;
}

Spectrum partial_spectrum(const SparseWeights& w, Index k, const SpectrumOptions& opt) {
  const Index n = w.size();
  if (k < 1 || k > n) fail(ErrorKind::parameter, "spectrum size K must be in [1, N]");
  require_connected(w);
  const VectorXd sqrt_d = w.degrees.cwiseSqrt();
  const VectorXd inv_sqrt_d = sqrt_d.cwiseInverse();
  SparseMatrix s = inv_sqrt_d.asDiagonal() * w.w * inv_sqrt_d.asDiagonal();
  s.makeCompressed();
  const VectorXd phi1 = sqrt_d.normalized();

  VectorXd mu(k);
  MatrixXd phi(n, k);
  mu[0] = 1.0;
  phi.col(0) = phi1;
  if (n <= opt.dense_limit || 2 * k > n) {
    // Moving phi_1 to eigenvalue -3, below the spectrum [-1, 1], keeps the
    // remaining top pairs orthogonal to it even on bipartite graphs.
    const MatrixXd deflated = MatrixXd(s) - 4.0 * phi1 * phi1.transpose();
    const Eigen::SelfAdjointEigenSolver<MatrixXd> es(deflated);
    if (es.info() != Eigen::Success) fail(ErrorKind::numerical, "dense eigensolver failed");
    for (Index a = 1; a < k; ++a) {
      mu[a] = es.eigenvalues()[n - a];
      phi.col(a) = es.eigenvectors().col(n - a);
    }
  } else {
    FilterOptions fo;
    fo.tolerance = opt.ritz_tolerance;
    fo.guard_vectors = opt.guard_vectors;
    fo.degree = opt.filter_degree;
    fo.max_iterations = opt.max_iterations;
    fo.seed = opt.seed;
    const MatrixXd deflate = phi1;
    auto op = [&s](const MatrixXd& x, MatrixXd& y) { y.noalias() = s * x; };
    // D^{-1/2} W D^{-1/2} has its spectrum in [-1, 1].
    const auto pairs = filtered_subspace_largest(op, n, k - 1, deflate, -1.0, fo);
    mu.tail(k - 1) = pairs.values;
    phi.rightCols(k - 1) = pairs.vectors;
  }

  Spectrum out;
  out.degrees = w.degrees;
  out.eigenvalues = (1.0 - mu.array()).max(0.0).matrix();
  out.eigenvalues[0] = 0.0;
  out.eigenvectors = inv_sqrt_d.asDiagonal() * phi;

  const VectorXd res = spectrum_residuals(out, w);
  for (Index a = 0; a < k; ++a) {
    if (res[a] > 1e-6) {
      std::ostringstream msg;
      msg << "eigenpair " << a << " has residual " << res[a] << " above 1e-6";
      fail(ErrorKind::numerical, msg.str());
    }
  }
  return out;
}

VectorXd spectrum_residuals(const Spectrum& s, const SparseWeights& w) {
  const RandomWalkLaplacian lap(w);
  const MatrixXd lv = lap.apply(s.eigenvectors);
  VectorXd res(s.count());
  for (Index a = 0; a < s.count(); ++a) {
    const auto v = s.eigenvectors.col(a);
    res[a] = (lv.col(a) - s.eigenvalues[a] * v).norm() / v.norm();
  }
  return res;
}

}  // namespace vmbo
