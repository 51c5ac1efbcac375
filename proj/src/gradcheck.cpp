#include "ctpd/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace ctpd {

double relative_error(double analytic, double numeric) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  if (scale == 0.0)
    return 0.0;
  return std::abs(analytic - numeric) / scale;
}

GradCheckResult check_ctpd_gradient(const CtpdSide &winner, const CtpdSide &loser,
                                    const ObjectiveConfig &cfg, double h) {
  GradCheckResult result;
  result.analytic = ctpd_gradient(winner, loser, cfg);

  CtpdSide w = winner;
  CtpdSide l = loser;
  auto probe = [&](CtpdSide &side, const std::vector<double> &grad) {
    for (std::size_t t = 0; t < side.policy_token_lp.size(); ++t) {
      const double saved = side.policy_token_lp[t];
      side.policy_token_lp[t] = saved + h;
      const double up = ctpd_objective_value(w, l, cfg);
      side.policy_token_lp[t] = saved - h;
      const double down = ctpd_objective_value(w, l, cfg);
      side.policy_token_lp[t] = saved;
      const double fd = (up - down) / (2.0 * h);
      result.max_rel_err = std::max(result.max_rel_err, relative_error(grad[t], fd));
      result.max_abs_err = std::max(result.max_abs_err, std::abs(grad[t] - fd));
    }
  };
  probe(w, result.analytic.grad_policy_tokens_w);
  probe(l, result.analytic.grad_policy_tokens_l);
  return result;
}

std::pair<CtpdSide, CtpdSide> random_ctpd_pair(std::mt19937_64 &gen) {
  std::uniform_int_distribution<int> span_count(1, 20);
  std::uniform_int_distribution<int> span_len(1, 3);
  std::uniform_real_distribution<double> lp(-10.0, 0.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> log_weight(-0.5, 1.5);

  auto make = [&] {
    CtpdSide side;
    const int spans = span_count(gen);
    for (int i = 0; i < spans; ++i) {
      const auto begin = side.policy_token_lp.size();
      const int len = span_len(gen);
      for (int t = 0; t < len; ++t)
        side.policy_token_lp.push_back(lp(gen));
      side.span_tokens.push_back({begin, side.policy_token_lp.size()});
      side.ref_span_lp.push_back(-10.0 * len * unit(gen));
      side.weights.push_back(std::exp(log_weight(gen)));
    }
    return side;
  };
  CtpdSide w = make();
  CtpdSide l = make();
  return {std::move(w), std::move(l)};
}

} // namespace ctpd
