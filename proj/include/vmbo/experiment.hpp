#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vmbo/config.hpp"
#include "vmbo/data.hpp"
#include "vmbo/init.hpp"
#include "vmbo/kernels.hpp"
#include "vmbo/mbo.hpp"

namespace vmbo {

LabeledDataset load_dataset(const Config& cfg);

enum class InitMethod { laguerre, voronoi, diffusion, diffusion_unconstrained };

// Graph, kernels and constraints shared by all trials of an experiment.
struct Pipeline {
  LabeledDataset data;
  SparseWeights weights;
  std::optional<Spectrum> spectrum;
  std::optional<DiffusionKernel> kernel;
  std::optional<DiffusionKernel> init_kernel;  // rank-K heat kernel for diffusion initialization
  VolumeConstraints constraints;
  InitMethod init = InitMethod::laguerre;
  MboConfig mbo;  // fidelity and temperature seed filled per trial
  double setup_ms = 0;
};

Pipeline build_pipeline(const Config& cfg);
Pipeline build_pipeline(const Config& cfg, LabeledDataset data);

DiffusionKernel build_kernel(const Config& cfg, const Pipeline& p, double h);

struct TrialResult {
  int trial = 0;
  std::uint64_t seed = 0;
  double accuracy = 0;
  double init_accuracy = 0;
  double energy = 0;
  int iterations = 0;
  Index outer_iterations = 0;
  double wall_ms = 0;
  MboTrace trace;
};

struct ExperimentResult {
  std::vector<TrialResult> trials;
  double mean = 0, sd = 0;
  double init_mean = 0, init_sd = 0;
  Index n = 0;
  int classes = 0;
  double setup_ms = 0;
  std::string dataset;
  std::string resolved_config;
};

TrialResult run_trial(const Pipeline& p, const Config& cfg, int trial);
ExperimentResult run_experiment(const Config& cfg, std::ostream* log = nullptr);
ExperimentResult run_experiment(const Config& cfg, const Pipeline& p, std::ostream* log = nullptr);

// results.csv, results.json, config.ini and optional per-trial traces.
void write_results(const std::filesystem::path& dir, const ExperimentResult& r, bool traces);

// Scaling probe over the configured h grid with the first trial's labels.
ScalingReport probe_scaling(const Config& cfg, std::ostream* log = nullptr);

// Binary ".bin": u32 N, u32 P, then f64 row-major, little-endian. Otherwise
// text: "N P" on the first line followed by N rows of P numbers.
MatrixXd read_scores(const std::filesystem::path& path);
void write_scores(const std::filesystem::path& path, const MatrixXd& u);

struct SolveReport {
  Solution<double> solution;
  double objective = 0;
};

SolveReport solve_file(const std::filesystem::path& scores, const VolumeConstraints& constraints,
                       const std::optional<VectorXd>& m0, const std::filesystem::path& out_dir);

}  // namespace vmbo
