#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "spfit/censoring.hpp"
#include "spfit/csv.hpp"
#include "spfit/gp.hpp"
#include "spfit/mcmc.hpp"
#include "spfit/shooting.hpp"
#include "spfit/surrogate.hpp"

namespace spfit {

struct CensoringConfig {
  bool enabled = true;
  std::optional<double> threshold;  // default: the censored rows' transformed value
  double monotone_limit = std::numeric_limits<double>::infinity();
  std::string direction = "decreasing-right";
  int max_attempts = 10000;
};

struct SimulateConfig {
  int points = 20;
  int replicates = 5;
  double noise_sd = 0.31622776601683794;  // variance 1/10
};

struct McmcRunConfig {
  int burn = 100000;
  int keep = 100000;
  double proposal_sd = 0.4472135954999579;  // variance 1/5
  std::vector<double> prior_lo;
  std::vector<double> prior_hi;
  std::vector<double> start;
  double ode_step = 0.0;
};

/// Whole-pipeline configuration; a single JSON document with CLI overrides.
/// Zero/empty fields fall back to per-model defaults (see apply_defaults).
struct RunConfig {
  std::string model = "lotka-volterra";
  std::string surrogate = "gp";
  int paths = 0;
  int grid_points = 0;
  std::uint64_t seed = 1;
  int threads = 0;
  std::filesystem::path out_dir = "out";
  std::vector<std::filesystem::path> data_files;
  std::string transform;  // "none" | "log10p1"
  bool export_paths = false;

  SimulateConfig simulate;
  FitConfig fit;
  CensoringConfig censoring;
  OptimizerConfig optimizer;
  std::vector<double> p0;
  McmcRunConfig mcmc;
};

RunConfig load_config(const std::filesystem::path& json_path);

/// Fills model-dependent defaults (path counts, grids, transform, start
/// policies, MCMC boxes) for fields the user left unset.
void apply_defaults(RunConfig& config);

// ---- data ingestion ----------------------------------------------------

/// One observed series after ingestion: complete (non-censored) design plus
/// the censored blocks and threshold in transformed units.
struct SeriesData {
  ReplicatedDesign design;
  std::vector<CensoredBlock> censored;
  double threshold = std::numeric_limits<double>::quiet_NaN();
};

double apply_transform(const std::string& transform, double value);
SeriesData ingest_rows(const std::vector<DataRow>& rows, const std::string& transform,
                       std::optional<double> threshold_override);

// ---- commands ----------------------------------------------------------

struct SimulateOutput {
  std::vector<std::filesystem::path> data_files;
};
SimulateOutput run_simulate(const RunConfig& config);

struct FitOutput {
  std::filesystem::path artifact;
  std::vector<std::filesystem::path> surfaces;
  std::vector<SurrogateFit> fits;
};
FitOutput run_fit(const RunConfig& config);

struct EstimateOutput {
  std::filesystem::path ensemble_csv;
  std::filesystem::path summary_json;
  PosteriorEnsemble ensemble;
  std::vector<double> unimodal_fraction;  // per observed series
};
EstimateOutput run_estimate(const RunConfig& config, const std::filesystem::path& artifact);

struct McmcOutput {
  std::filesystem::path chain_csv;
  std::filesystem::path summary_json;
  McmcResult result;
};
McmcOutput run_mcmc(const RunConfig& config);

struct SummarizeOutput {
  std::filesystem::path report_json;
  std::filesystem::path widths_csv;
};
SummarizeOutput run_summarize(const std::vector<std::filesystem::path>& inputs,
                              const std::filesystem::path& out_dir);

// ---- fit artifact ------------------------------------------------------

struct FitArtifact {
  std::string model;
  std::string surrogate;
  std::string transform;
  std::uint64_t seed = 0;
  std::vector<SurrogateFit> fits;           // one per series
  std::vector<SeriesData> series;           // designs + censoring info
};

void save_fit_artifact(const std::filesystem::path& path, const FitArtifact& artifact);
FitArtifact load_fit_artifact(const std::filesystem::path& path);

/// Synthetic stand-in for the within-host viral load study: titer data on
/// days 1..11 with 15 replicates per day, heteroskedastic heavy-tailed noise
/// in log space, and below-threshold rows marked censored.
std::vector<DataRow> make_influenza_standin(std::uint64_t seed);

}  // namespace spfit
