#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "sigsim/errors.hpp"
#include "sigsim/fit.hpp"
#include "sigsim/random.hpp"
#include "sigsim/sampled.hpp"

using namespace sigsim;

namespace {

SampledWaveform sample_model(const SigmoidTrace& trace, double t_lo, double t_hi, double dt) {
  return sample_trace(trace, t_lo, t_hi, dt);
}

}  // namespace

TEST_CASE("levenberg_marquardt on linear residuals") {
  // r(p) = A p - y with invertible A reduces to a Gauss-Newton solve.
  Eigen::MatrixXd A(3, 3);
  A << 2.0, 0.3, -0.1, 0.1, 1.5, 0.2, -0.3, 0.2, 1.1;
  const Eigen::VectorXd p_true = Eigen::Vector3d(0.3, -0.2, 0.5);
  const Eigen::VectorXd y = A * p_true;
  auto residuals = [&](const Eigen::VectorXd& p) -> Eigen::VectorXd { return A * p - y; };
  auto jacobian = [&](const Eigen::VectorXd&) -> Eigen::MatrixXd { return A; };

  const LmResult res = levenberg_marquardt(residuals, jacobian, Eigen::Vector3d(0.1, 0.1, 0.1), {});
  CHECK(residuals(res.params).norm() < 1e-10);
  // ||r|| < 1e-10 within two accepted steps (cost_log[0] is the initial cost)
  REQUIRE(res.cost_log.size() >= 3);
  CHECK(res.cost_log[2] < 0.5 * 1e-10 * 1e-10);
}

TEST_CASE("levenberg_marquardt with forward-difference jacobian") {
  Eigen::MatrixXd A(2, 2);
  A << 1.0, 0.2, -0.1, 0.8;
  const Eigen::VectorXd y = Eigen::Vector2d(0.4, 0.6);
  auto residuals = [&](const Eigen::VectorXd& p) -> Eigen::VectorXd { return A * p - y; };
  const LmResult res = levenberg_marquardt(residuals, nullptr, Eigen::Vector2d(0.0, 0.0), {});
  CHECK(residuals(res.params).norm() < 1e-6);
}

TEST_CASE("levenberg_marquardt on Rosenbrock residuals") {
  auto residuals = [](const Eigen::VectorXd& p) -> Eigen::VectorXd {
    Eigen::VectorXd r(2);
    r << 10.0 * (p[1] - p[0] * p[0]), 1.0 - p[0];
    return r;
  };
  auto jacobian = [](const Eigen::VectorXd& p) -> Eigen::MatrixXd {
    Eigen::MatrixXd jac(2, 2);
    jac << -20.0 * p[0], 10.0, -1.0, 0.0;
    return jac;
  };

  // Independent oracle: plain gradient descent, run long.
  Eigen::VectorXd gd = Eigen::Vector2d(-1.2, 1.0);
  for (int i = 0; i < 2000000; ++i) {
    const Eigen::VectorXd g = jacobian(gd).transpose() * residuals(gd);
    gd -= 1e-3 * g;
  }
  CHECK(gd[0] == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(gd[1] == doctest::Approx(1.0).epsilon(1e-4));

  FitConfig cfg;
  cfg.max_iterations = 500;
  const LmResult res = levenberg_marquardt(residuals, jacobian, Eigen::Vector2d(-1.2, 1.0), cfg);
  CHECK(std::abs(res.params[0] - 1.0) < 1e-6);
  CHECK(std::abs(res.params[1] - 1.0) < 1e-6);
}

TEST_CASE("levenberg_marquardt at the optimum returns immediately") {
  const SigmoidTrace truth{{{3.0, 7.0}}, 0.8, 0};
  const SampledWaveform w = sample_model(truth, 0.0, 1.4e-9, 1e-12);
  auto residuals = [&](const Eigen::VectorXd& p) -> Eigen::VectorXd {
    Eigen::VectorXd r(static_cast<Eigen::Index>(w.samples.size()));
    for (Eigen::Index j = 0; j < r.size(); ++j) {
      r[j] = trace_model_value(p, to_scaled(w.time_at(static_cast<size_t>(j))), 0.8, 0) -
             w.samples[static_cast<size_t>(j)];
    }
    return r;
  };
  Eigen::VectorXd init(2);
  init << 3.0, 7.0;
  const LmResult res = levenberg_marquardt(residuals, nullptr, init, {});
  CHECK(res.iterations == 0);
  CHECK(res.params == init);
  CHECK(res.cost == 0.0);
}

TEST_CASE("levenberg_marquardt cost is non-increasing across accepted steps") {
  const SigmoidTrace truth{{{4.0, 2.0}, {-4.0, 6.0}}, 0.8, 0};
  const SampledWaveform w = sample_model(truth, 0.0, 1e-9, 1e-12);
  const FitReport rep = fit_trace(w, 2, 0.8, 0, {});
  for (size_t i = 1; i < rep.lm.cost_log.size(); ++i) {
    CHECK(rep.lm.cost_log[i] <= rep.lm.cost_log[i - 1]);
  }
}

TEST_CASE("levenberg_marquardt rejects a degenerate parameterization") {
  auto residuals = [](const Eigen::VectorXd&) -> Eigen::VectorXd {
    return Eigen::Vector2d(1.0, 2.0);  // constant: zero jacobian
  };
  CHECK_THROWS_AS(levenberg_marquardt(residuals, nullptr, Eigen::Vector2d(0.0, 0.0), {}),
                  SingularNormalEquations);
}

TEST_CASE("analytic jacobian matches central differences") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = rng.uniform_int(1, 3);
    Eigen::VectorXd p(2 * n);
    for (int i = 0; i < n; ++i) {
      p[2 * i] = (rng.uniform01() < 0.5 ? -1 : 1) * rng.uniform(0.5, 8.0);
      p[2 * i + 1] = rng.uniform(0.0, 10.0);
    }
    for (int k = 0; k < 10; ++k) {
      const double t_scaled = rng.uniform(-2.0, 12.0);
      Eigen::RowVectorXd analytic(2 * n);
      trace_model_jacobian_row(p, t_scaled, 0.8, analytic);
      for (int j = 0; j < 2 * n; ++j) {
        const double h = 1e-6 * std::max(std::abs(p[j]), 1.0);
        Eigen::VectorXd pp = p, pm = p;
        pp[j] += h;
        pm[j] -= h;
        const double fd = (trace_model_value(pp, t_scaled, 0.8, 0) -
                           trace_model_value(pm, t_scaled, 0.8, 0)) /
                          (2.0 * h);
        // absolute floor keeps entries below the FD noise (~eps |f| / h) from
        // being compared against themselves
        const double scale = std::max({std::abs(fd), std::abs(analytic[j]), 1e-3});
        CHECK(std::abs(analytic[j] - fd) / scale < 1e-5);
      }
    }
  }
}

TEST_CASE("fit_trace recovers a single sigmoid exactly") {
  const SigmoidTrace truth{{{3.0, 7.0}}, 0.8, 0};
  const SampledWaveform w = sample_model(truth, 0.0, 1.4e-9, 1.4e-12);  // 1000 samples
  const FitReport rep = fit_trace(w, 1, 0.8, 0, {});
  CHECK(std::abs(rep.trace.transitions[0].slope - 3.0) / 3.0 < 1e-6);
  CHECK(std::abs(rep.trace.transitions[0].time - 7.0) / 7.0 < 1e-6);
}

TEST_CASE("fit_trace recovers a two-transition pulse") {
  const SigmoidTrace truth{{{4.0, 2.0}, {-4.0, 6.0}}, 0.8, 0};
  const SampledWaveform w = sample_model(truth, 0.0, 1e-9, 1e-12);
  const FitReport rep = fit_trace(w, 2, 0.8, 0, {});
  REQUIRE(rep.trace.transitions.size() == 2);
  CHECK(std::abs(rep.trace.transitions[0].slope - 4.0) / 4.0 < 1e-4);
  CHECK(std::abs(rep.trace.transitions[0].time - 2.0) / 2.0 < 1e-4);
  CHECK(std::abs(rep.trace.transitions[1].slope + 4.0) / 4.0 < 1e-4);
  CHECK(std::abs(rep.trace.transitions[1].time - 6.0) / 6.0 < 1e-4);
}

TEST_CASE("clipping removes the influence of an overshoot spike") {
  const SigmoidTrace truth{{{5.0, 3.0}}, 0.8, 0};
  SampledWaveform clean = sample_model(truth, 0.0, 8e-10, 1e-12);
  SampledWaveform spiked = clean;
  // +10% overshoot hump right after the rising edge
  for (size_t i = 0; i < spiked.samples.size(); ++i) {
    const double t = spiked.time_at(i);
    if (t > 3.2e-10 && t < 4.2e-10) {
      spiked.samples[i] += 0.08 * std::sin((t - 3.2e-10) / 1e-10 * 3.14159265358979);
    }
  }
  const FitReport a = fit_trace(clean, 1, 0.8, 0, {});
  const FitReport b = fit_trace(spiked, 1, 0.8, 0, {});
  CHECK(std::abs(a.trace.transitions[0].time - b.trace.transitions[0].time) < 1e-3);
}

TEST_CASE("fit_trace is a fixed point on its own output") {
  const SigmoidTrace truth{{{2.5, 1.0}, {-3.5, 4.0}, {1.5, 9.0}}, 0.8, 0};
  const SampledWaveform w = sample_model(truth, 0.0, 1.6e-9, 2e-12);
  const FitReport first = fit_trace(w, 3, 0.8, 0, {});
  const SampledWaveform w2 = sample_model(first.trace, 0.0, 1.6e-9, 2e-12);
  const FitReport second = fit_trace(w2, 3, 0.8, 0, {});
  for (size_t i = 0; i < 3; ++i) {
    const auto& p = first.trace.transitions[i];
    const auto& q = second.trace.transitions[i];
    CHECK(std::abs(p.slope - q.slope) / std::abs(p.slope) < 1e-6);
    CHECK(std::abs(p.time - q.time) / std::abs(p.time) < 1e-6);
  }
}

TEST_CASE("fit_trace error paths") {
  const SigmoidTrace truth{{{4.0, 2.0}, {-4.0, 6.0}}, 0.8, 0};
  const SampledWaveform w = sample_model(truth, 0.0, 1e-9, 1e-12);
  CHECK_THROWS_AS(fit_trace(w, 3, 0.8, 0, {}), SeedCountMismatch);
  try {
    fit_trace(w, 1, 0.8, 0, {});
    FAIL("expected SeedCountMismatch");
  } catch (const SeedCountMismatch& e) {
    CHECK(e.expected == 1);
    CHECK(e.found == 2);
  }
}

TEST_CASE("heavier inflection weighting does not hurt crossing accuracy") {
  // Statistical: median crossing-time error over noisy fits must not grow
  // when the inflection weight increases.
  Rng rng(1234);
  std::vector<double> err_low, err_high;
  for (int trial = 0; trial < 100; ++trial) {
    const double a = rng.uniform(2.0, 6.0);
    const double b = rng.uniform(3.0, 5.0);
    const SigmoidTrace truth{{{a, b}}, 0.8, 0};
    SampledWaveform w = sample_model(truth, 0.0, 1e-9, 2e-12);
    // smooth distortion: biases the waveform without adding crossings
    const double phase = rng.uniform(0.0, 6.28);
    const double amplitude = rng.uniform(0.005, 0.02);
    for (size_t i = 0; i < w.samples.size(); ++i) {
      w.samples[i] += amplitude * std::sin(w.time_at(i) / 1.3e-10 + phase);
    }

    FitConfig low;
    low.inflection_weight = 1.0;
    FitConfig high;
    high.inflection_weight = 10.0;
    err_low.push_back(std::abs(fit_trace(w, 1, 0.8, 0, low).trace.transitions[0].time - b));
    err_high.push_back(std::abs(fit_trace(w, 1, 0.8, 0, high).trace.transitions[0].time - b));
  }
  std::sort(err_low.begin(), err_low.end());
  std::sort(err_high.begin(), err_high.end());
  CHECK(err_high[50] <= err_low[50] * 1.05 + 1e-9);
}
