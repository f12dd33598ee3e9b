#include "spfit/surrogate.hpp"

namespace spfit {

PredictiveDistribution predict(const SurrogateFit& fit, std::span<const double> grid,
                               bool include_noise) {
  return std::visit(
      [&](const auto& f) -> PredictiveDistribution {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, GPFit>) {
          return gp_predict(f, grid, include_noise);
        } else if constexpr (std::is_same_v<T, HetGPFit>) {
          return hetgp_predict(f, grid, include_noise);
        } else {
          return hettp_predict(f, grid, include_noise);
        }
      },
      fit);
}

double noise_variance_at(const SurrogateFit& fit, double t) {
  return std::visit(
      [&](const auto& f) -> double {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, GPFit>) {
          (void)t;
          return f.noise_variance;
        } else if constexpr (std::is_same_v<T, HetGPFit>) {
          return hetgp_noise_predict(f, t);
        } else {
          return hettp_noise_predict(f, t);
        }
      },
      fit);
}

std::optional<double> posterior_dof(const SurrogateFit& fit) {
  if (const auto* tp = std::get_if<HetTPFit>(&fit)) {
    return tp->dof_posterior();
  }
  return std::nullopt;
}

SurrogateFit rebase(const SurrogateFit& fit, ReplicatedDesign design) {
  return std::visit(
      [&](const auto& f) -> SurrogateFit {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, GPFit>) {
          return make_gp_fit(f.kernel, f.noise_variance, std::move(design));
        } else if constexpr (std::is_same_v<T, HetGPFit>) {
          return rebase_hetgp(f, std::move(design));
        } else {
          return rebase_hettp(f, std::move(design));
        }
      },
      fit);
}

const ReplicatedDesign& design_of(const SurrogateFit& fit) {
  return std::visit([](const auto& f) -> const ReplicatedDesign& { return f.design; }, fit);
}

std::string surrogate_name(const SurrogateFit& fit) {
  return std::visit(
      [](const auto& f) -> std::string {
        using T = std::decay_t<decltype(f)>;
        (void)f;
        if constexpr (std::is_same_v<T, GPFit>) {
          return "gp";
        } else if constexpr (std::is_same_v<T, HetGPFit>) {
          return "hetgp";
        } else {
          return "hettp";
        }
      },
      fit);
}

}  // namespace spfit
