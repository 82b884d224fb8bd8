#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "vmbo/fidelity.hpp"
#include "vmbo/kernels.hpp"
#include "vmbo/osstat.hpp"

namespace vmbo {

// E = (1/s_A) (1/N) sum_{i != j} <chi_i, A chi_j>
double thresholding_energy(const DiffusionKernel& a, const Clustering& c);
// Same, from a precomputed product A chi.
double thresholding_energy(const Clustering& c, const MatrixXd& product, double scaling);

// d^2 = -2h E(chi - chi_prev) = (2h / s_A) (1/N) sum_i <delta_i, A delta_i>
double distance_term(const DiffusionKernel& a, const Clustering& c, const Clustering& prev);

// |chi - chi_prev| in l^1 with the 1/N normalization: 2 #moved / N.
double increment_l1(const Clustering& c, const Clustering& prev);

// Thresholding with labeled points held in their classes. Pinned points are
// removed from the problem and their counts taken off the volumes.
struct Threshold {
  Clustering clustering;
  VectorXd m;
  SolverStats stats;
};

Threshold constrained_threshold(const MatrixXd& u, const VolumeConstraints& constraints,
                                const std::vector<int>& pinned, const VectorXd& m0, const SolverOptions& opt = {});

enum class WarmStart { center, previous };

struct Temperature {
  double noise_scale = 0.05;
  int fixed_iterations = 50;
  std::uint64_t seed = 1;
};

struct MboConfig {
  VolumeConstraints constraints;
  double stop_eps = 1e-4;
  int max_iters = 300;
  std::optional<Temperature> temperature;
  WarmStart warm_start = WarmStart::previous;
  FidelitySet fidelity;
  // Update A chi from the sparse increment instead of a full product.
  bool incremental = true;
  SolverOptions solver;
};

struct StepRecord {
  int iteration = 0;
  double energy = 0;
  double distance = 0;
  double increment_l1 = 0;
  Index moved = 0;
  SolverStats stats;
  VectorXd m;
  VectorXd lagrange;
  // |m - 1/P|_inf after shifting m to sum to one.
  double off_center = 0;
  double wall_ms = 0;
  double best_energy = 0;
};

struct MboTrace {
  double initial_energy = 0;
  double scaling = 1;
  double h = 1;
  std::vector<StepRecord> steps;
  double best_energy = 0;
  int best_iteration = 0;
  bool converged = false;
};

struct MboResult {
  Clustering clustering;
  MboTrace trace;
};

// Everything carried from one iteration to the next.
struct MboState {
  Clustering clustering;
  DiffusedLabels product;  // A chi
  VectorXd m;
};

struct StepOptions {
  const std::vector<int>* pinned = nullptr;
  const MatrixXd* noise = nullptr;  // added to A chi before thresholding
  bool incremental = true;
  SolverOptions solver;
};

// One diffuse-and-threshold step from `state`, warm-started at m0.
MboState mbo_step(const DiffusionKernel& a, const MboState& state, const VolumeConstraints& constraints,
                  const VectorXd& m0, const StepOptions& opt, StepRecord* record = nullptr);

MboResult run(const DiffusionKernel& a, const MboConfig& config, const Clustering& init);

struct IncrementReport {
  bool applicable = false;
  double bound = 0;  // 4 s_A E(chi^0)
  std::vector<double> increments;
  std::vector<bool> holds;
  bool all_hold = true;
  std::string note;
};

// Checks |chi^l - chi^{l-1}|_1 <= 4 s_A E(chi^0) for kernels that are
// symmetric and conserve mass.
IncrementReport increment_sparsity_check(const MboTrace& trace, const KernelFlags& flags);

struct ScalingRow {
  double h = 0;
  int run = 0;
  int iteration = 0;
  Index initial_error = 0;
  double off_center = 0;
  Index outer_iterations = 0;
  double wall_ms = 0;
};

struct ScalingReport {
  std::vector<ScalingRow> rows;
  std::vector<double> hs;
  std::vector<double> mean_initial_error;
  double slope = 0;
  Index bad_iterations = 0;
  Index total_iterations = 0;
  double bad_fraction = 0;
};

struct ProbeRun {
  MboConfig config;
  Clustering init;
};

// Runs MBO for every h and every run, then regresses log mean E(m0) on log h.
// The mean is over warm-started iterations; the first iteration of a run
// starts at the center and is left out. An iteration is bad when its order
// statistic is further than 1/(4P) from the center.
ScalingReport sqrt_h_scaling_probe(const std::function<DiffusionKernel(double)>& make_kernel,
                                   const std::vector<double>& hs, const std::vector<ProbeRun>& runs);

void write_trace_csv(std::ostream& os, const MboTrace& trace);
std::string trace_summary_json(const MboTrace& trace);
void write_scaling_csv(std::ostream& os, const ScalingReport& report);

}  // namespace vmbo
