#include "spfit/sampler.hpp"

#include <cmath>
#include <utility>

#include "spfit/errors.hpp"
#include "spfit/linalg.hpp"
#include "spfit/rng.hpp"

namespace spfit {

namespace {

/// Factor of a predictive covariance with the spec'd jitter escalation;
/// an exactly-zero covariance yields a zero factor (degenerate draws).
std::pair<Eigen::MatrixXd, bool> predictive_factor(const Eigen::MatrixXd& cov) {
  if (cov.rows() == 0) return {Eigen::MatrixXd(0, 0), true};
  const double magnitude = cov.cwiseAbs().maxCoeff();
  if (magnitude == 0.0) {
    return {Eigen::MatrixXd::Zero(cov.rows(), cov.cols()), true};
  }
  const double scale = cov.diagonal().cwiseAbs().mean();
  Cholesky chol = factorize_spd(cov, scale > 0.0 ? scale : magnitude, 1e-8, 1e-4);
  return {std::move(chol.lower), false};
}

Eigen::VectorXd standard_normal(Eigen::Index dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd z(dim);
  for (Eigen::Index i = 0; i < dim; ++i) z[i] = normal(rng);
  return z;
}

Eigen::VectorXd mixture_draw(const Eigen::VectorXd& mean, const Eigen::MatrixXd& lower,
                             std::optional<double> dof, std::mt19937_64& rng) {
  Eigen::VectorXd z = standard_normal(mean.size(), rng);
  double scale = 1.0;
  if (dof) {
    // Gaussian scale mixture: covariance equals the factored matrix,
    // marginals are Student-t with the given dof.
    std::chi_squared_distribution<double> chi2(*dof);
    const double w = chi2(rng);
    scale = std::sqrt((*dof - 2.0) / w);
  }
  return mean + scale * (lower * z);
}

const Eigen::VectorXd& fit_alpha(const SurrogateFit& fit) {
  return std::visit([](const auto& f) -> const Eigen::VectorXd& { return f.alpha; }, fit);
}

}  // namespace

Eigen::VectorXd draw_predictive(const PredictiveDistribution& pred, std::mt19937_64& rng,
                                bool noise_free) {
  if (noise_free && pred.noise_included) {
    throw InvalidArgumentError("draw_predictive: noise-free draw from a noise-included law");
  }
  Eigen::MatrixXd cov = pred.covariance;
  if (!noise_free && !pred.noise_included) {
    cov.diagonal() += pred.noise_variance;
  }
  auto [lower, zero] = predictive_factor(cov);
  if (zero) {
    if (pred.dof) {
      // Consume the mixture draw so downstream draws stay aligned.
      std::chi_squared_distribution<double> chi2(*pred.dof);
      (void)standard_normal(pred.mean.size(), rng);
      (void)chi2(rng);
      return pred.mean;
    }
    (void)standard_normal(pred.mean.size(), rng);
    return pred.mean;
  }
  return mixture_draw(pred.mean, lower, pred.dof, rng);
}

std::vector<SamplePath> sample_paths(const PredictiveDistribution& pred, int count,
                                     std::uint64_t master_seed, bool noise_free,
                                     std::uint64_t first_index) {
  if (count < 1) {
    throw InvalidArgumentError("sample_paths: count must be at least 1");
  }
  if (noise_free && pred.noise_included) {
    throw InvalidArgumentError("sample_paths: noise-free draw from a noise-included law");
  }
  Eigen::MatrixXd cov = pred.covariance;
  if (!noise_free && !pred.noise_included) {
    cov.diagonal() += pred.noise_variance;
  }
  auto [lower, zero] = predictive_factor(cov);

  std::vector<SamplePath> paths(static_cast<std::size_t>(count));
  for (int j = 0; j < count; ++j) {
    const std::uint64_t index = first_index + static_cast<std::uint64_t>(j);
    std::mt19937_64 rng = substream(master_seed, index, stream::kPath);
    SamplePath& path = paths[static_cast<std::size_t>(j)];
    path.grid = pred.grid;
    path.seed = index;
    Eigen::VectorXd values =
        zero ? pred.mean : mixture_draw(pred.mean, lower, pred.dof, rng);
    path.values = values;
  }
  return paths;
}

GridSampler::GridSampler(const SurrogateFit& structure, std::vector<double> grid)
    : grid_(std::move(grid)) {
  const ReplicatedDesign& design = design_of(structure);
  times_ = design.times;
  counts_ = design.counts;

  PredictiveDistribution pred = predict(structure, grid_, false);
  dof_ = pred.dof;
  if (const auto* tp = std::get_if<HetTPFit>(&structure)) {
    structure_tail_factor_ =
        (tp->dof + tp->beta - 2.0) / (tp->dof + tp->design.total() - 2.0);
  }
  Eigen::MatrixXd base = pred.covariance / structure_tail_factor_;
  auto [lower, zero] = predictive_factor(base);
  base_lower_ = std::move(lower);
  zero_covariance_ = zero;

  std::visit(
      [&](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, GPFit>) {
          cross_ = kernel_matrix(f.kernel, grid_, times_);
        } else if constexpr (std::is_same_v<T, HetGPFit>) {
          cross_ = correlation_matrix(f.family, f.mean_lengthscale, grid_, times_);
        } else {
          cross_ = f.scale * correlation_matrix(f.family, f.mean_lengthscale, grid_, times_);
        }
      },
      structure);
}

SamplePath GridSampler::draw(const SurrogateFit& rebased, std::uint64_t master_seed,
                             std::uint64_t path_index) const {
  const ReplicatedDesign& design = design_of(rebased);
  if (design.times != times_ || design.counts != counts_) {
    throw InvalidArgumentError("GridSampler: rebased fit has a different conditioning structure");
  }

  SamplePath path;
  path.grid = grid_;
  path.seed = path_index;
  const Eigen::VectorXd mean = cross_ * fit_alpha(rebased);

  double tail_scale = 1.0;
  std::optional<double> dof;
  if (const auto* tp = std::get_if<HetTPFit>(&rebased)) {
    const double total = tp->design.total();
    tail_scale = std::sqrt((tp->dof + tp->beta - 2.0) / (tp->dof + total - 2.0));
    dof = tp->dof + total;
  }

  std::mt19937_64 rng = substream(master_seed, path_index, stream::kPath);
  if (zero_covariance_) {
    path.values = mean;
    return path;
  }
  Eigen::VectorXd values = mixture_draw(mean, (tail_scale * base_lower_).eval(), dof, rng);
  path.values = values;
  return path;
}

}  // namespace spfit
