#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "spfit/predictive.hpp"
#include "spfit/surrogate.hpp"

namespace spfit {

/// One posterior predictive realization on a grid; `values` has one column
/// per observed series. `seed` records the substream index the path was
/// drawn with; `augmentation_id` names the censoring draw that conditioned
/// it (-1 if none).
struct SamplePath {
  std::vector<double> grid;
  Eigen::MatrixXd values;
  std::uint64_t seed = 0;
  std::int64_t augmentation_id = -1;
};

/// Draws `count` sample paths from a joint predictive law. Path j is produced
/// by the deterministic substream (master_seed, first_index + j), so output is
/// independent of batching and execution schedule. With noise_free unset, the
/// pointwise noise variances are added to the covariance diagonal before
/// factorization. Student-t predictives (pred.dof set) are drawn as a
/// Gaussian scale mixture whose covariance equals pred's covariance and whose
/// marginal dof equals pred.dof.
std::vector<SamplePath> sample_paths(const PredictiveDistribution& pred, int count,
                                     std::uint64_t master_seed, bool noise_free = true,
                                     std::uint64_t first_index = 0);

/// Single draw from a predictive law using an already-seeded engine; the
/// low-level primitive behind sample_paths and the censoring rejection loop.
Eigen::VectorXd draw_predictive(const PredictiveDistribution& pred, std::mt19937_64& rng,
                                bool noise_free = true);

/// Repeated grid sampling against rebased fits that share one conditioning
/// structure (identical design times, counts and noise law; only the data
/// values differ). The expensive grid-covariance factorization is computed
/// once; per-path work is a matrix-vector product. Draws are noise-free.
class GridSampler {
 public:
  GridSampler(const SurrogateFit& structure, std::vector<double> grid);

  SamplePath draw(const SurrogateFit& rebased, std::uint64_t master_seed,
                  std::uint64_t path_index) const;

  const std::vector<double>& grid() const { return grid_; }

 private:
  std::vector<double> grid_;
  std::vector<double> times_;
  std::vector<int> counts_;
  Eigen::MatrixXd cross_;       // covariance between grid and design points
  Eigen::MatrixXd base_lower_;  // factor of the latent grid covariance (unit tail factor)
  bool zero_covariance_ = false;
  std::optional<double> dof_;
  double structure_tail_factor_ = 1.0;
};

}  // namespace spfit
