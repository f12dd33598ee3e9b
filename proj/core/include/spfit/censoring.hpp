#pragma once

#include <limits>
#include <random>
#include <span>
#include <vector>

#include "spfit/replicated_design.hpp"
#include "spfit/surrogate.hpp"

namespace spfit {

enum class MonotoneDirection { kDecreasingRight, kDecreasingLeft };

struct CensoredBlock {
  double time;
  int count;
};

/// Where and how observations fell below the detection threshold.
/// `monotone_limit` restricts the monotone acceptance constraint to censored
/// times up to (decreasing-right) or down to (decreasing-left) the limit;
/// times beyond it are still imputed below the threshold but without the
/// shape constraint.
struct CensoringSpec {
  double threshold = 0.0;
  std::vector<CensoredBlock> censored;  // strictly increasing times
  MonotoneDirection direction = MonotoneDirection::kDecreasingRight;
  int max_attempts = 10000;
  double monotone_limit = std::numeric_limits<double>::infinity();
};

/// Noise-free predictive draw on `grid`, accepted only when its values
/// strictly decrease along `constrained` (indices into the grid, listed in
/// the direction of required decay). Throws RejectionExhaustedError after
/// max_attempts rejections, reporting the empirical acceptance rate.
std::vector<double> draw_monotone_path(const SurrogateFit& fit, std::span<const double> grid,
                                       const std::vector<int>& constrained, int max_attempts,
                                       std::mt19937_64& rng);

/// `count` draws from the fit's noise law at t, centered at `center`, each
/// strictly below `threshold`; inverse-CDF truncation (Gaussian for Gaussian
/// surrogates, Student-t with the posterior dof for hetTP).
std::vector<double> draw_truncated_noise(const SurrogateFit& fit, double t, double threshold,
                                         double center, int count, std::mt19937_64& rng);

/// Iterative data augmentation over the censored times: draw a monotone
/// noise-free path conditioned on everything imputed so far, replace the
/// censored replicates at the current time with truncated noise draws
/// centered on the path, treat them as data, move to the next censored time.
/// Returns a complete design; never returns a partial augmentation.
ReplicatedDesign augment_censored(const SurrogateFit& fit, const ReplicatedDesign& design,
                                  const CensoringSpec& spec, std::mt19937_64& rng);

}  // namespace spfit
