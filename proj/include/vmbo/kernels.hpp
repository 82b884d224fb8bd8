#pragma once

#include <memory>
#include <string>
#include <vector>

#include "vmbo/graph.hpp"
#include "vmbo/osstat.hpp"
#include "vmbo/spectrum.hpp"

namespace vmbo {

enum class KernelKind { rank_k_heat, positive_taylor, squared_rw, squared_rw_twice, shifted_squared_rw };

enum class InnerProduct { plain, degree };

struct KernelFlags {
  bool symmetric = false;
  InnerProduct inner_product = InnerProduct::plain;  // in which symmetry and PSD hold
  bool conserves_mass = false;
  bool positive_semidefinite = false;
};

// Diffusion operator A(h) acting column-wise on N x P matrices.
class DiffusionKernel {
 public:
  KernelKind kind() const { return kind_; }
  // Time step; 1 for the h-free squared random-walk kernels.
  double h() const { return h_; }
  // s_A(h), the energy normalization.
  double scaling() const { return scaling_; }
  const KernelFlags& flags() const { return flags_; }
  Index size() const { return n_; }
  Index rank() const { return rank_; }
  int order() const { return order_; }
  double shift() const { return shift_; }
  std::string id() const;

  MatrixXd operator*(const MatrixXd& x) const { return multiply(x); }
  MatrixXd multiply(const MatrixXd& x) const;
  // A applied to a matrix with few nonzeros, given as sorted triplets.
  MatrixXd multiply_sparse(const std::vector<Eigen::Triplet<double>>& entries, Index cols) const;
  // Dense N x N matrix (small graphs only).
  MatrixXd dense() const;
  // Degree weights of the inner product in which the flags hold.
  const VectorXd& degrees() const { return degrees_; }

 private:
  friend DiffusionKernel make_rank_k_heat(const Spectrum&, double, Index);
  friend DiffusionKernel make_positive_taylor(const SparseWeights&, double, int);
  friend DiffusionKernel make_squared_rw_kernel(const SparseWeights&, KernelKind, double);

  KernelKind kind_ = KernelKind::rank_k_heat;
  double h_ = 1;
  double scaling_ = 1;
  KernelFlags flags_;
  Index n_ = 0;
  Index rank_ = 0;
  int order_ = 0;
  double shift_ = 0;
  VectorXd degrees_;

  // RankKHeat: A x = basis diag(decay) dual^T x
  std::shared_ptr<const MatrixXd> basis_;
  std::shared_ptr<const MatrixXd> dual_;
  VectorXd decay_;
  // Materialized sparse kernels, rows and columns.
  std::shared_ptr<const SparseMatrix> rows_;
  std::shared_ptr<const Eigen::SparseMatrix<double, Eigen::ColMajor, int>> cols_;
  // PositiveTaylor with large J: D^{-1} W and the series coefficients.
  std::shared_ptr<const SparseMatrix> step_;
  std::vector<double> coeffs_;
};

// sum_{k<K} exp(-h lambda_k) <v_k, .>_D v_k
DiffusionKernel make_rank_k_heat(const Spectrum& spec, double h, Index k);

// (sum_{j<=J} h^j/j!)^{-1} sum_{j<=J} (h^j/j!) (D^{-1}W)^j, J even.
DiffusionKernel make_positive_taylor(const SparseWeights& w, double h, int order);

enum class SquaredVariant { plain, squared_twice, shifted };

// (D^{-1}W)^T D^{-1}W, its square, or (D^{-1}W)^T D^{-1}W - r I.
DiffusionKernel make_squared_rw(const SparseWeights& w, SquaredVariant variant, double r = 0.1);

struct ProbeReport {
  double symmetry_error = 0;
  double mass_error = 0;
  double min_quadratic_form = 0;
};

// Randomized checks of symmetry, A1 = 1 and x^T A x >= 0 in the kernel's inner product.
ProbeReport probe_kernel(const DiffusionKernel& a, int probes = 20, std::uint64_t seed = 7);

// Smallest eigenvalue of the symmetric matrix (D^{-1}W)^T D^{-1}W.
double squared_rw_min_eigenvalue(const SparseWeights& w);

struct DiffusedLabels {
  MatrixXd values;
  double h = 0;
  std::string kernel_id;
};

DiffusedLabels apply(const DiffusionKernel& a, const Clustering& c);
DiffusedLabels apply(const DiffusionKernel& a, const MatrixXd& x);

// chi_next - chi_prev as triplets (point, cluster, +-1).
struct SparseDelta {
  Index rows = 0;
  Index cols = 0;
  std::vector<Eigen::Triplet<double>> entries;

  static SparseDelta between(const Clustering& prev, const Clustering& next);
  bool empty() const { return entries.empty(); }
};

// A chi_next = A (chi_next - chi_prev) + A chi_prev
DiffusedLabels apply_incremental(const DiffusionKernel& a, const DiffusedLabels& prev, const SparseDelta& delta);

const char* to_string(KernelKind kind);
KernelKind kernel_kind_from_string(const std::string& name);

}  // namespace vmbo
