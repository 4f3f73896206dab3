#include "sigsim/fit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "sigsim/errors.hpp"

namespace sigsim {

void FitConfig::validate() const {
  if (max_iterations <= 0 || !(initial_damping > 0.0) || !(convergence_tol > 0.0) ||
      !(inflection_weight >= 1.0) || !(inflection_window > 0.0)) {
    throw DataError("fit config fields must be positive");
  }
}

namespace {

Eigen::MatrixXd forward_difference_jacobian(const ResidualFn& residuals, const Eigen::VectorXd& x,
                                            const Eigen::VectorXd& r0) {
  Eigen::MatrixXd jac(r0.size(), x.size());
  for (int j = 0; j < x.size(); ++j) {
    const double h = 1e-8 * std::max(std::abs(x[j]), 1.0);
    Eigen::VectorXd xp = x;
    xp[j] += h;
    jac.col(j) = (residuals(xp) - r0) / h;
  }
  return jac;
}

}  // namespace

LmResult levenberg_marquardt(const ResidualFn& residuals, const JacobianFn& jacobian,
                             const Eigen::VectorXd& init, const FitConfig& cfg) {
  cfg.validate();
  constexpr double kDampingCeiling = 1e16;
  constexpr double kDampingFloor = 1e-18;

  LmResult res;
  res.params = init;
  Eigen::VectorXd r = residuals(init);
  if (!r.allFinite()) throw NumericError("residuals not finite at initial parameters");
  double cost = 0.5 * r.squaredNorm();
  res.cost_log.push_back(cost);

  double damping = cfg.initial_damping;
  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    if (cost == 0.0) {
      res.stop = LmStop::Converged;
      break;
    }
    const Eigen::MatrixXd jac =
        jacobian ? jacobian(res.params) : forward_difference_jacobian(residuals, res.params, r);
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd grad = jac.transpose() * r;
    Eigen::VectorXd diag = jtj.diagonal();
    const double max_diag = diag.maxCoeff();
    if (!(max_diag > 0.0) || !std::isfinite(max_diag)) {
      throw SingularNormalEquations("normal matrix has no positive diagonal entry");
    }
    diag = diag.cwiseMax(1e-12 * max_diag);

    bool accepted = false;
    while (!accepted) {
      Eigen::MatrixXd damped = jtj;
      damped.diagonal() += damping * diag;
      const Eigen::LDLT<Eigen::MatrixXd> solver(damped);
      Eigen::VectorXd step;
      bool solve_ok = solver.info() == Eigen::Success;
      if (solve_ok) {
        step = solver.solve(-grad);
        solve_ok = step.allFinite();
      }
      if (solve_ok) {
        const Eigen::VectorXd trial = res.params + step;
        const Eigen::VectorXd r_trial = residuals(trial);
        const double cost_trial = r_trial.allFinite() ? 0.5 * r_trial.squaredNorm()
                                                      : std::numeric_limits<double>::infinity();
        if (cost_trial < cost) {
          const double predicted = 0.5 * step.dot(damping * diag.cwiseProduct(step) - grad);
          const double gain = predicted > 0.0 ? (cost - cost_trial) / predicted : 1.0;
          const double rel_change = (cost - cost_trial) / std::max(cost, 1e-300);
          res.params = trial;
          r = r_trial;
          cost = cost_trial;
          res.cost_log.push_back(cost);
          ++res.iterations;
          accepted = true;
          // Near-unit gain means the local model is essentially exact, so the
          // damping collapses toward a pure Gauss-Newton step.
          if (gain > 0.95) {
            damping = std::max(damping * 1e-5, kDampingFloor);
          } else if (gain > 0.5) {
            damping = std::max(damping / 9.0, kDampingFloor);
          } else {
            damping = std::max(damping / 2.0, kDampingFloor);
          }
          if (rel_change < cfg.convergence_tol) {
            res.stop = LmStop::Converged;
            res.cost = cost;
            return res;
          }
          break;
        }
      }
      damping *= 11.0;
      if (damping > kDampingCeiling) {
        if (solve_ok || res.iterations > 0) {
          res.stop = LmStop::DampingOverflow;
          res.cost = cost;
          return res;
        }
        throw SingularNormalEquations("damped normal equations unsolvable at all dampings");
      }
    }
    res.stop = LmStop::MaxIterations;
  }
  res.cost = cost;
  return res;
}

double trace_model_value(const Eigen::VectorXd& params, double t_scaled, double vdd, int offset) {
  double sum = 0.0;
  for (int i = 0; i + 1 < params.size(); i += 2) {
    const double u = params[i] * (t_scaled - params[i + 1]);
    if (u >= 0.0) {
      sum += 1.0 / (1.0 + std::exp(-u));
    } else {
      const double e = std::exp(u);
      sum += e / (1.0 + e);
    }
  }
  return vdd * (sum - offset);
}

void trace_model_jacobian_row(const Eigen::VectorXd& params, double t_scaled, double vdd,
                              Eigen::Ref<Eigen::RowVectorXd, 0, Eigen::InnerStride<>> row) {
  for (int i = 0; i + 1 < params.size(); i += 2) {
    const double a = params[i];
    const double b = params[i + 1];
    const double u = a * (t_scaled - b);
    double l;
    if (u >= 0.0) {
      l = 1.0 / (1.0 + std::exp(-u));
    } else {
      const double e = std::exp(u);
      l = e / (1.0 + e);
    }
    const double dl = l * (1.0 - l);
    row[i] = vdd * dl * (t_scaled - b);
    row[i + 1] = -vdd * dl * a;
  }
}

namespace {

struct Seed {
  double a = 0.0;
  double b = 0.0;
  double crossing_time = 0.0;  // seconds
};

// Interpolated time where the sample sequence crosses `level` while scanning
// from index `from` in direction `dir`. Negative when not found before the
// scan runs out of the window [lo_idx, hi_idx].
double scan_level_crossing(const std::vector<double>& s, double t0, double dt, long from, int dir,
                           double level, bool want_below, long lo_idx, long hi_idx) {
  for (long i = from; i >= lo_idx && i <= hi_idx; i += dir) {
    const bool past = want_below ? (s[static_cast<size_t>(i)] <= level)
                                 : (s[static_cast<size_t>(i)] >= level);
    if (past) {
      const long j = i - dir;  // previous scanned index, on the other side of `level`
      if (j < 0 || j >= static_cast<long>(s.size())) return t0 + dt * static_cast<double>(i);
      const double si = s[static_cast<size_t>(i)];
      const double sj = s[static_cast<size_t>(j)];
      if (sj == si) return t0 + dt * static_cast<double>(i);
      const double frac = (level - si) / (sj - si);
      return t0 + dt * (static_cast<double>(i) + frac * static_cast<double>(j - i));
    }
  }
  return -1.0;
}

std::vector<Seed> seed_from_crossings(const std::vector<double>& clipped, double t0, double dt,
                                      double vdd) {
  const double vth = 0.5 * vdd;
  std::vector<Seed> seeds;
  std::vector<size_t> crossing_idx;
  for (size_t i = 1; i < clipped.size(); ++i) {
    const bool above_prev = clipped[i - 1] >= vth;
    const bool above_now = clipped[i] >= vth;
    if (above_prev == above_now) continue;
    const double frac = (vth - clipped[i - 1]) / (clipped[i] - clipped[i - 1]);
    Seed seed;
    seed.crossing_time = t0 + dt * (static_cast<double>(i - 1) + frac);
    seed.b = to_scaled(seed.crossing_time);
    const bool rising = above_now;

    // 20%-80% secant through the edge; falls back to the local derivative
    // when overlapping neighbours hide one of the levels.
    const long lo_idx = crossing_idx.empty() ? 0 : static_cast<long>(crossing_idx.back());
    long hi_idx = static_cast<long>(clipped.size()) - 1;
    for (size_t j = i; j + 1 < clipped.size(); ++j) {
      const bool a0 = clipped[j] >= vth;
      const bool a1 = clipped[j + 1] >= vth;
      if (a0 != a1) {
        hi_idx = static_cast<long>(j);
        break;
      }
    }
    const double lo_level = rising ? 0.2 * vdd : 0.8 * vdd;
    const double hi_level = rising ? 0.8 * vdd : 0.2 * vdd;
    const double t_lo = scan_level_crossing(clipped, t0, dt, static_cast<long>(i) - 1, -1, lo_level,
                                            rising, lo_idx, hi_idx);
    const double t_hi = scan_level_crossing(clipped, t0, dt, static_cast<long>(i), +1, hi_level,
                                            !rising, lo_idx, hi_idx);
    double magnitude = 0.0;
    if (t_lo >= 0.0 && t_hi > t_lo) {
      magnitude = 2.0 * std::log(4.0) / to_scaled(t_hi - t_lo);
    } else {
      const double dv = (clipped[i] - clipped[i - 1]) / dt;  // V/s at the crossing
      magnitude = std::abs(4.0 * dv / (vdd * kScaledPerSecond));
    }
    if (!(magnitude > 0.0) || !std::isfinite(magnitude)) magnitude = 1.0;
    seed.a = rising ? magnitude : -magnitude;
    seeds.push_back(seed);
    crossing_idx.push_back(i);
  }
  return seeds;
}

}  // namespace

FitReport fit_trace(const SampledWaveform& w, int n_transitions, double vdd, int initial_level,
                    const FitConfig& cfg) {
  w.validate();
  cfg.validate();
  if (n_transitions < 1) throw DataError("n_transitions must be >= 1");
  if (!(vdd > 0.0)) throw DataError("vdd must be positive");
  if (initial_level != 0 && initial_level != 1) throw DataError("initial_level must be 0 or 1");

  std::vector<double> clipped(w.samples.size());
  for (size_t i = 0; i < w.samples.size(); ++i) {
    clipped[i] = std::clamp(w.samples[i], 0.0, vdd);
  }

  const std::vector<Seed> seeds = seed_from_crossings(clipped, w.t0, w.dt, vdd);
  if (static_cast<int>(seeds.size()) != n_transitions) {
    throw SeedCountMismatch(n_transitions, static_cast<int>(seeds.size()));
  }
  const bool first_rising = seeds.front().a > 0.0;
  if (first_rising != (initial_level == 0)) {
    throw FitDiverged("first detected crossing direction contradicts initial_level");
  }

  // Falling-transition count fixes the integer supply offset of the model.
  const int falling = initial_level == 0 ? n_transitions / 2 : (n_transitions + 1) / 2;
  const int offset = falling - initial_level;

  Eigen::VectorXd init(2 * n_transitions);
  for (int i = 0; i < n_transitions; ++i) {
    init[2 * i] = seeds[i].a;
    init[2 * i + 1] = seeds[i].b;
  }

  Eigen::VectorXd weights = Eigen::VectorXd::Ones(static_cast<int>(clipped.size()));
  for (int j = 0; j < weights.size(); ++j) {
    const double t = w.t0 + w.dt * j;
    for (const Seed& s : seeds) {
      if (std::abs(t - s.crossing_time) <= cfg.inflection_window) {
        weights[j] = cfg.inflection_weight;
        break;
      }
    }
  }

  // The model itself is clipped inside the residual: overlapping tails push
  // the raw sum slightly outside [0, vdd], and comparing an unclipped model
  // against clipped samples would bias the optimum.
  const int m = static_cast<int>(clipped.size());
  auto residuals = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd r(m);
    for (int j = 0; j < m; ++j) {
      const double t_scaled = to_scaled(w.t0 + w.dt * j);
      const double value = std::clamp(trace_model_value(p, t_scaled, vdd, offset), 0.0, vdd);
      r[j] = weights[j] * (value - clipped[j]);
    }
    return r;
  };
  auto jacobian = [&](const Eigen::VectorXd& p) {
    Eigen::MatrixXd jac(m, p.size());
    for (int j = 0; j < m; ++j) {
      const double t_scaled = to_scaled(w.t0 + w.dt * j);
      const double value = trace_model_value(p, t_scaled, vdd, offset);
      if (value <= 0.0 || value >= vdd) {
        jac.row(j).setZero();  // clipped region: flat
      } else {
        trace_model_jacobian_row(p, t_scaled, vdd, jac.row(j));
        jac.row(j) *= weights[j];
      }
    }
    return jac;
  };

  FitReport report;
  report.lm = levenberg_marquardt(residuals, jacobian, init, cfg);

  std::vector<Transition> fitted(n_transitions);
  for (int i = 0; i < n_transitions; ++i) {
    fitted[i] = {report.lm.params[2 * i], report.lm.params[2 * i + 1]};
  }
  std::sort(fitted.begin(), fitted.end(),
            [](const Transition& x, const Transition& y) { return x.time < y.time; });

  report.trace.transitions = fitted;
  report.trace.vdd = vdd;
  report.trace.initial_level = initial_level;
  try {
    report.trace.validate();
  } catch (const InvalidTrace& e) {
    throw FitDiverged(std::string("fitted parameters violate trace invariants: ") + e.what());
  }

  double sq = 0.0;
  for (int j = 0; j < m; ++j) {
    const double t_scaled = to_scaled(w.t0 + w.dt * j);
    const double value =
        std::clamp(trace_model_value(report.lm.params, t_scaled, vdd, offset), 0.0, vdd);
    const double d = value - clipped[j];
    sq += d * d;
  }
  report.rms = std::sqrt(sq / m);
  if (report.rms > 0.25 * vdd) {
    throw FitDiverged("fit RMS " + std::to_string(report.rms) + " exceeds vdd/4");
  }
  return report;
}

}  // namespace sigsim
