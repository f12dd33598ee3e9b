#pragma once

#include <optional>
#include <span>
#include <string>
#include <variant>

#include "spfit/gp.hpp"
#include "spfit/hetgp.hpp"
#include "spfit/hettp.hpp"

namespace spfit {

/// Any of the fitted surrogate process types, with uniform dispatch helpers
/// so downstream sampling, censoring and pipeline code stay model-agnostic.
using SurrogateFit = std::variant<GPFit, HetGPFit, HetTPFit>;

PredictiveDistribution predict(const SurrogateFit& fit, std::span<const double> grid,
                               bool include_noise = false);

/// Observation-noise variance at time t under the fit's noise law.
double noise_variance_at(const SurrogateFit& fit, double t);

/// Student-t posterior degrees of freedom; empty for Gaussian surrogates.
std::optional<double> posterior_dof(const SurrogateFit& fit);

/// Same hyperparameters, new conditioning data.
SurrogateFit rebase(const SurrogateFit& fit, ReplicatedDesign design);

const ReplicatedDesign& design_of(const SurrogateFit& fit);

std::string surrogate_name(const SurrogateFit& fit);

}  // namespace spfit
