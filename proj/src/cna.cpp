#include "cnagnn/cna.hpp"

#include <array>
#include <cassert>
#include <cmath>
#include <string>

#include <Eigen/Dense>
#include <unsupported/Eigen/NonLinearOptimization>

#include "cnagnn/errors.hpp"

namespace cnagnn {

Tensor cluster_normalize(const Tensor& x, std::span<const int> assignments, std::size_t k,
                         double eps) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  if (assignments.size() != n) {
    throw DimensionError("cluster_normalize: " + std::to_string(assignments.size()) +
                         " assignments for " + std::to_string(n) + " rows");
  }
  if (!(eps > 0.0)) throw ContractError("cluster_normalize: eps must be positive");
  for (int a : assignments) {
    if (a < 0 || static_cast<std::size_t>(a) >= k) {
      throw ContractError("cluster_normalize: assignment outside [0, k)");
    }
  }

  const auto xv = x.values();
  std::vector<double> count(k, 0.0);
  std::vector<double> mu(k * d, 0.0);
  std::vector<double> var(k * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<std::size_t>(assignments[i]);
    count[c] += 1.0;
    for (std::size_t j = 0; j < d; ++j) mu[c * d + j] += xv[i * d + j];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (count[c] == 0.0) continue;
    for (std::size_t j = 0; j < d; ++j) mu[c * d + j] /= count[c];
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<std::size_t>(assignments[i]);
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = xv[i * d + j] - mu[c * d + j];
      var[c * d + j] += diff * diff;
    }
  }
  std::vector<double> inv_std(k * d, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    if (count[c] == 0.0) continue;
    for (std::size_t j = 0; j < d; ++j) {
      inv_std[c * d + j] = 1.0 / std::sqrt(var[c * d + j] / count[c] + eps);
    }
  }

  std::vector<double> out(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto c = static_cast<std::size_t>(assignments[i]);
    for (std::size_t j = 0; j < d; ++j) {
      out[i * d + j] = (xv[i * d + j] - mu[c * d + j]) * inv_std[c * d + j];
    }
  }

  std::vector<int> assign(assignments.begin(), assignments.end());
  std::vector<double> normalized = out;
  return record_op(
      "cluster_normalize", x.shape(), std::move(out), {x},
      [x, assign = std::move(assign), normalized = std::move(normalized), inv_std = std::move(inv_std),
       count = std::move(count), k, n, d](std::span<const double> g) mutable {
        // Batch-norm backward within each cluster:
        // dx = inv_std * (g - mean(g) - xhat * mean(g * xhat)).
        std::vector<double> mean_g(k * d, 0.0);
        std::vector<double> mean_gx(k * d, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
          const auto c = static_cast<std::size_t>(assign[i]);
          for (std::size_t j = 0; j < d; ++j) {
            mean_g[c * d + j] += g[i * d + j];
            mean_gx[c * d + j] += g[i * d + j] * normalized[i * d + j];
          }
        }
        for (std::size_t c = 0; c < k; ++c) {
          if (count[c] == 0.0) continue;
          for (std::size_t j = 0; j < d; ++j) {
            mean_g[c * d + j] /= count[c];
            mean_gx[c * d + j] /= count[c];
          }
        }
        auto gx = x.grad_accumulator();
        for (std::size_t i = 0; i < n; ++i) {
          const auto c = static_cast<std::size_t>(assign[i]);
          for (std::size_t j = 0; j < d; ++j) {
            const std::size_t cj = c * d + j;
            gx[i * d + j] +=
                inv_std[cj] * (g[i * d + j] - mean_g[cj] - normalized[i * d + j] * mean_gx[cj]);
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Rational activations

RationalCoeffs RationalCoeffs::make(std::span<const double> numerator,
                                    std::span<const double> denominator, bool requires_grad) {
  if (numerator.size() != kNumeratorDegree + 1 || denominator.size() != kDenominatorDegree) {
    throw DimensionError("rational: expected 6 numerator and 4 denominator coefficients");
  }
  return {Tensor::from(1, kNumeratorDegree + 1, {numerator.begin(), numerator.end()}, requires_grad),
          Tensor::from(1, kDenominatorDegree, {denominator.begin(), denominator.end()}, requires_grad)};
}

RationalCoeffs RationalCoeffs::identity(bool requires_grad) {
  const std::array<double, 6> a{0, 1, 0, 0, 0, 0};
  const std::array<double, 4> b{0, 0, 0, 0};
  return make(a, b, requires_grad);
}

RationalCoeffs RationalCoeffs::clone(bool requires_grad) const {
  return make(numerator.values(), denominator.values(), requires_grad);
}

namespace {

struct RationalPoint {
  double value = 0.0;
  double d_x = 0.0;
  double p = 0.0;
  double q = 1.0;
  double sign_s = 0.0;
};

RationalPoint eval_rational(double x, std::span<const double> a, std::span<const double> b) {
  // Horner for P, P', S, S'.
  double p = a[kNumeratorDegree];
  double dp = 0.0;
  for (std::size_t k = kNumeratorDegree; k-- > 0;) {
    dp = dp * x + p;
    p = p * x + a[k];
  }
  // S(x) = x * (b1 + b2 x + b3 x^2 + b4 x^3)
  double inner = b[kDenominatorDegree - 1];
  double d_inner = 0.0;
  for (std::size_t k = kDenominatorDegree - 1; k-- > 0;) {
    d_inner = d_inner * x + inner;
    inner = inner * x + b[k];
  }
  const double s = x * inner;
  const double ds = inner + x * d_inner;
  const double sign_s = s > 0.0 ? 1.0 : (s < 0.0 ? -1.0 : 0.0);
  const double q = 1.0 + std::fabs(s);
  assert(q >= 1.0);
  RationalPoint r;
  r.value = p / q;
  r.d_x = (dp * q - p * sign_s * ds) / (q * q);
  r.p = p;
  r.q = q;
  r.sign_s = sign_s;
  return r;
}

void accumulate_coeff_grads(double x, double g, const RationalPoint& r, std::span<double> ga,
                            std::span<double> gb) {
  double xk = 1.0;
  for (std::size_t k = 0; k <= kNumeratorDegree; ++k) {
    if (!ga.empty()) ga[k] += g * xk / r.q;
    if (k >= 1 && k <= kDenominatorDegree && !gb.empty()) {
      gb[k - 1] += -g * r.p * r.sign_s * xk / (r.q * r.q);
    }
    xk *= x;
  }
}

}  // namespace

double RationalCoeffs::evaluate(double x) const {
  return eval_rational(x, numerator.values(), denominator.values()).value;
}

Tensor rational_forward(const Tensor& x, const RationalCoeffs& coeffs) {
  const std::vector<int> single(x.rows(), 0);
  return rational_forward_clustered(x, single, std::span<const RationalCoeffs>(&coeffs, 1));
}

Tensor rational_forward_clustered(const Tensor& x, std::span<const int> assignments,
                                  std::span<const RationalCoeffs> coeffs) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  if (assignments.size() != n) throw DimensionError("rational: assignment count differs from rows");
  for (const auto& c : coeffs) {
    if (c.numerator.size() != kNumeratorDegree + 1 || c.denominator.size() != kDenominatorDegree) {
      throw DimensionError("rational: malformed coefficient set");
    }
  }
  for (int a : assignments) {
    if (a < 0 || static_cast<std::size_t>(a) >= coeffs.size()) {
      throw ContractError("rational: assignment without a coefficient set");
    }
  }

  const auto xv = x.values();
  std::vector<double> out(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = coeffs[static_cast<std::size_t>(assignments[i])];
    for (std::size_t j = 0; j < d; ++j) {
      const double v = eval_rational(xv[i * d + j], c.numerator.values(), c.denominator.values()).value;
      if (!std::isfinite(v)) {
        throw NumericError("rational activation: non-finite output for coefficient set " +
                           std::to_string(assignments[i]));
      }
      out[i * d + j] = v;
    }
  }

  std::vector<Tensor> inputs{x};
  std::vector<RationalCoeffs> sets(coeffs.begin(), coeffs.end());
  for (const auto& c : sets) {
    inputs.push_back(c.numerator);
    inputs.push_back(c.denominator);
  }
  std::vector<int> assign(assignments.begin(), assignments.end());
  return record_op(
      "rational", x.shape(), std::move(out), std::move(inputs),
      [x, sets = std::move(sets), assign = std::move(assign), n, d](std::span<const double> g) mutable {
        const auto xv = x.values();
        std::span<double> gx;
        if (x.requires_grad()) gx = x.grad_accumulator();
        for (std::size_t i = 0; i < n; ++i) {
          auto& c = sets[static_cast<std::size_t>(assign[i])];
          std::span<double> ga;
          std::span<double> gb;
          if (c.numerator.requires_grad()) ga = c.numerator.grad_accumulator();
          if (c.denominator.requires_grad()) gb = c.denominator.grad_accumulator();
          for (std::size_t j = 0; j < d; ++j) {
            const double xi = xv[i * d + j];
            const double gi = g[i * d + j];
            const RationalPoint r = eval_rational(xi, c.numerator.values(), c.denominator.values());
            if (!gx.empty()) gx[i * d + j] += gi * r.d_x;
            if (!ga.empty() || !gb.empty()) accumulate_coeff_grads(xi, gi, r, ga, gb);
          }
        }
      });
}

RationalFitReport rational_init_fit(double slope, double lo, double hi, std::size_t samples,
                                    double max_error) {
  if (samples < 2 || !(hi > lo)) throw ContractError("rational_init_fit: bad grid");
  constexpr std::size_t kNum = kNumeratorDegree + 1;
  constexpr std::size_t kDen = kDenominatorDegree;
  constexpr std::size_t kMaxRounds = 50;

  Eigen::VectorXd xs(static_cast<Eigen::Index>(samples));
  Eigen::VectorXd ys(static_cast<Eigen::Index>(samples));
  for (std::size_t i = 0; i < samples; ++i) {
    const double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(samples - 1);
    xs[static_cast<Eigen::Index>(i)] = x;
    ys[static_cast<Eigen::Index>(i)] = x > 0.0 ? x : slope * x;
  }
  const auto m = static_cast<Eigen::Index>(samples);

  Eigen::VectorXd a = Eigen::VectorXd::Zero(kNum);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(kDen);

  auto denom_sum = [&](double x) {
    double s = 0.0;
    double xk = x;
    for (std::size_t k = 0; k < kDen; ++k) {
      s += b[static_cast<Eigen::Index>(k)] * xk;
      xk *= x;
    }
    return s;
  };
  auto numer = [&](double x) {
    double p = 0.0;
    double xk = 1.0;
    for (std::size_t k = 0; k < kNum; ++k) {
      p += a[static_cast<Eigen::Index>(k)] * xk;
      xk *= x;
    }
    return p;
  };
  auto residuals = [&](double& sse, double& max_abs) {
    sse = 0.0;
    max_abs = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double r = numer(xs[i]) / (1.0 + std::fabs(denom_sum(xs[i]))) - ys[i];
      sse += r * r;
      max_abs = std::max(max_abs, std::fabs(r));
    }
  };

  Eigen::VectorXd best_a = a;
  Eigen::VectorXd best_b = b;
  double best_sse = std::numeric_limits<double>::infinity();
  double best_max = std::numeric_limits<double>::infinity();
  std::size_t rounds = 0;

  Eigen::MatrixXd num_design(m, static_cast<Eigen::Index>(kNum));
  Eigen::MatrixXd den_design(m, static_cast<Eigen::Index>(kDen));
  Eigen::VectorXd rhs(m);
  for (std::size_t round = 0; round < kMaxRounds; ++round) {
    rounds = round + 1;
    // Numerator with the denominator held fixed: linear in a.
    for (Eigen::Index i = 0; i < m; ++i) {
      const double q = 1.0 + std::fabs(denom_sum(xs[i]));
      double xk = 1.0;
      for (std::size_t k = 0; k < kNum; ++k) {
        num_design(i, static_cast<Eigen::Index>(k)) = xk / q;
        xk *= xs[i];
      }
    }
    a = num_design.colPivHouseholderQr().solve(ys);

    double sse = 0.0;
    double max_abs = 0.0;
    residuals(sse, max_abs);
    if (sse < best_sse) {
      best_sse = sse;
      best_max = max_abs;
      best_a = a;
      best_b = b;
    }

    // Denominator, linearized around the current sign pattern of S:
    // P(x) - y = y * sign(S) * S(x), weighted by 1 / Q_prev.
    for (Eigen::Index i = 0; i < m; ++i) {
      const double s = denom_sum(xs[i]);
      const double sign = s < 0.0 ? -1.0 : 1.0;
      const double w = 1.0 / (1.0 + std::fabs(s));
      double xk = xs[i];
      for (std::size_t k = 0; k < kDen; ++k) {
        den_design(i, static_cast<Eigen::Index>(k)) = w * ys[i] * sign * xk;
        xk *= xs[i];
      }
      rhs[i] = w * (numer(xs[i]) - ys[i]);
    }
    const Eigen::VectorXd prev_b = b;
    b = den_design.colPivHouseholderQr().solve(rhs);
    if ((b - prev_b).norm() < 1e-12 * (1.0 + b.norm())) break;
  }

  // The alternating solves give a reasonable start but stall well above the
  // least-squares optimum; finish with Levenberg-Marquardt on the full model.
  struct Residuals {
    enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

    const Eigen::VectorXd& xs;
    const Eigen::VectorXd& ys;

    int inputs() const { return static_cast<int>(kNum + kDen); }
    int values() const { return static_cast<int>(xs.size()); }

    // Numerator value, denominator sum S and the powers of x for one sample.
    void parts(const Eigen::VectorXd& p, double x, double& num, double& s,
               std::array<double, kNum>& pow) const {
      pow[0] = 1.0;
      for (std::size_t k = 1; k < kNum; ++k) pow[k] = pow[k - 1] * x;
      num = 0.0;
      for (std::size_t k = 0; k < kNum; ++k) num += p[static_cast<Eigen::Index>(k)] * pow[k];
      s = 0.0;
      for (std::size_t k = 0; k < kDen; ++k) s += p[static_cast<Eigen::Index>(kNum + k)] * pow[k + 1];
    }
    int operator()(const Eigen::VectorXd& p, Eigen::VectorXd& r) const {
      std::array<double, kNum> pow{};
      for (Eigen::Index i = 0; i < xs.size(); ++i) {
        double num = 0.0;
        double s = 0.0;
        parts(p, xs[i], num, s, pow);
        r[i] = num / (1.0 + std::fabs(s)) - ys[i];
      }
      return 0;
    }
    int df(const Eigen::VectorXd& p, Eigen::MatrixXd& jac) const {
      std::array<double, kNum> pow{};
      for (Eigen::Index i = 0; i < xs.size(); ++i) {
        double num = 0.0;
        double s = 0.0;
        parts(p, xs[i], num, s, pow);
        const double q = 1.0 + std::fabs(s);
        const double sign = s > 0.0 ? 1.0 : (s < 0.0 ? -1.0 : 0.0);
        for (std::size_t k = 0; k < kNum; ++k) jac(i, static_cast<Eigen::Index>(k)) = pow[k] / q;
        for (std::size_t k = 0; k < kDen; ++k) {
          jac(i, static_cast<Eigen::Index>(kNum + k)) = -num * sign * pow[k + 1] / (q * q);
        }
      }
      return 0;
    }
  };
  Residuals fn{xs, ys};
  Eigen::VectorXd p(static_cast<Eigen::Index>(kNum + kDen));
  p << best_a, best_b;
  Eigen::LevenbergMarquardt<Residuals> lm(fn);
  lm.parameters.maxfev = 20000;
  lm.minimize(p);
  {
    const Eigen::VectorXd saved_a = a;
    const Eigen::VectorXd saved_b = b;
    a = p.head(static_cast<Eigen::Index>(kNum));
    b = p.tail(static_cast<Eigen::Index>(kDen));
    double sse = 0.0;
    double max_abs = 0.0;
    residuals(sse, max_abs);
    if (std::isfinite(sse) && sse < best_sse) {
      best_sse = sse;
      best_max = max_abs;
      best_a = a;
      best_b = b;
    }
    a = saved_a;
    b = saved_b;
  }

  std::vector<double> av(best_a.data(), best_a.data() + kNum);
  std::vector<double> bv(best_b.data(), best_b.data() + kDen);
  RationalFitReport report{RationalCoeffs::make(av, bv), best_max, rounds};
  if (!(best_max < max_error)) {
    throw Error("rational_init_fit: max fit error " + std::to_string(best_max) +
                " does not meet bound " + std::to_string(max_error));
  }
  return report;
}

// ---------------------------------------------------------------------------

CnaLayerState CnaLayerState::make(std::size_t k, double eps, const RationalCoeffs& init,
                                  std::uint64_t seed) {
  if (k < 1) throw ContractError("cna: k must be at least 1");
  CnaLayerState s;
  s.k = k;
  s.eps = eps;
  s.kmeans_options.k = k;
  s.kmeans_options.seed = seed;
  s.rationals.reserve(k);
  for (std::size_t c = 0; c < k; ++c) s.rationals.push_back(init.clone());
  return s;
}

Tensor cna_apply(const Tensor& h, CnaLayerState& state, Mode mode, CnaSteps steps) {
  if (state.rationals.size() != state.k) {
    throw ContractError("cna_apply: need exactly k rational coefficient sets");
  }
  const std::size_t n = h.rows();
  const std::size_t d = h.cols();

  std::vector<int> assignments;
  std::size_t groups = 1;
  if (steps.cluster) {
    if (state.k > n) {
      throw ContractError("cna_apply: k = " + std::to_string(state.k) + " exceeds " +
                          std::to_string(n) + " nodes");
    }
    groups = state.k;
    if (state.freeze_assignments) {
      if (state.kmeans.assignments.size() != n) {
        throw ContractError("cna_apply: frozen assignments do not match the number of nodes");
      }
      assignments = state.kmeans.assignments;
    } else {
      KMeansOptions options = state.kmeans_options;
      options.k = state.k;
      const bool warm = state.warm_start && state.kmeans.k == state.k && state.kmeans.dim == d &&
                        state.kmeans.centroids.size() == state.k * d;
      KMeansState fit =
          warm ? kmeans_fit(h.values(), n, d, options, std::span<const double>(state.kmeans.centroids))
               : kmeans_fit(h.values(), n, d, options);
      assignments = fit.assignments;
      if (mode == Mode::train) state.kmeans = std::move(fit);
    }
  } else {
    assignments.assign(n, 0);
  }

  Tensor out = h;
  if (steps.normalize) out = cluster_normalize(out, assignments, groups, state.eps);
  if (steps.activate) {
    out = steps.cluster
              ? rational_forward_clustered(out, assignments, state.rationals)
              : rational_forward(out, state.rationals.front());
  }
  return out;
}

}  // namespace cnagnn
