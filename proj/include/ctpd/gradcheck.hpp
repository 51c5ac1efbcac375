#pragma once

#include <cstdint>
#include <random>
#include <utility>

#include "ctpd/objective.hpp"

namespace ctpd {

/// |a - b| / max(|a|, |b|); 0 when both are exactly 0.
double relative_error(double analytic, double numeric);

struct GradCheckResult {
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  LossOutput analytic;
};

/// Compares ctpd_gradient against central differences of
/// ctpd_objective_value, perturbing each policy token log-prob by +-h.
GradCheckResult check_ctpd_gradient(const CtpdSide &winner, const CtpdSide &loser,
                                    const ObjectiveConfig &cfg, double h = 1e-6);

/// Random pair for gradient checks: 1-20 spans of 1-3 student tokens, token
/// log-probs in [-10, 0], reference span log-probs in [-10 * tokens, 0] and
/// weights in [e^-0.5, e^1.5].
std::pair<CtpdSide, CtpdSide> random_ctpd_pair(std::mt19937_64 &gen);

} // namespace ctpd
