// Copyright 2026 the roadq authors
//   Licensed under the Apache License, Version 2.0 (the "License");
//   you may not use this file except in compliance with the License.
//   You may obtain a copy of the License at
//       http://www.apache.org/licenses/LICENSE-2.0
//
//   Unless required by applicable law or agreed to in writing, software
//   distributed under the License is distributed on an "AS IS" BASIS,
//   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
//   See the License for the specific language governing permissions and
//   limitations under the License.

#ifndef ROADQ_QUEUE_MODELS_HPP
#define ROADQ_QUEUE_MODELS_HPP

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "roadq/errors.hpp"
#include "roadq/polynomial.hpp"

namespace roadq {

constexpr std::size_t kMaxBatchSize = 32;

/// Probability mass function of the arrival batch size. probs[n-1] is the
/// probability of a batch of n vehicles, n = 1..G.
class batch_pmf {
public:
    batch_pmf() = default;

    explicit batch_pmf(std::vector<double> probs) : probs_(std::move(probs)) {
        if (probs_.empty() || probs_.size() > kMaxBatchSize)
            throw validation_error("batch pmf must have between 1 and " +
                                   std::to_string(kMaxBatchSize) + " entries");
        double sum = 0.0;
        for (double g : probs_) {
            if (g < 0.0) throw validation_error("batch pmf entries must be >= 0");
            sum += g;
        }
        if (std::abs(sum - 1.0) > 1e-12)
            throw validation_error("batch pmf must sum to 1 within 1e-12");
        mean_ = 0.0;
        for (std::size_t n = 0; n < probs_.size(); ++n)
            mean_ += static_cast<double>(n + 1) * probs_[n];
    }

    const std::vector<double>& probs() const { return probs_; }
    std::size_t max_size() const { return probs_.size(); }
    double mean() const { return mean_; }
    bool is_unit() const { return probs_.size() == 1; }

private:
    std::vector<double> probs_{};
    double mean_ = 1.0;
};

/// Uniform time grid for tabulated distributions.
struct grid_spec {
    double step = 0.0;     // 0 selects the default step
    double horizon = 0.0;  // 0 selects the adaptive horizon
};

/// Default tabulation step: fine enough to resolve the sharpest exponential
/// decay present, capped at 1e-3 time units.
inline double default_grid_step(double max_rate) {
    double h = 1.0 / (50.0 * std::max(max_rate, 1e-9));
    return std::min(1e-3, h);
}

struct tabulated_distribution {
    double step = 0.0;
    std::vector<double> pdf;
    std::vector<double> cdf;

    double horizon() const { return step * static_cast<double>(cdf.size() - 1); }

    double cdf_at(double t) const {
        if (t <= 0.0) return 0.0;
        const double x = t / step;
        const auto i = static_cast<std::size_t>(x);
        if (i + 1 >= cdf.size()) return cdf.back();
        const double frac = x - static_cast<double>(i);
        return cdf[i] * (1.0 - frac) + cdf[i + 1] * frac;
    }
};

/// Sojourn-time distribution of a single queue: either the analytic
/// exponential of an M/M/1 queue or a grid tabulation.
struct sojourn_distribution {
    enum class kind { analytic_exponential, tabulated };

    kind form = kind::analytic_exponential;
    double rate = 0.0;  // mu - lambda, for the analytic case
    tabulated_distribution tab;

    double cdf_at(double t) const {
        if (form == kind::analytic_exponential)
            return t <= 0.0 ? 0.0 : 1.0 - std::exp(-rate * t);
        return tab.cdf_at(t);
    }

    double mean() const {
        if (form == kind::analytic_exponential) return 1.0 / rate;
        // trapezoid integral of 1 - F
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < tab.cdf.size(); ++i)
            acc += (1.0 - tab.cdf[i]) + (1.0 - tab.cdf[i + 1]);
        return 0.5 * acc * tab.step;
    }
};

/// Ratio of polynomials in the transform variable s, lowest degree first.
struct rational_transform {
    poly numerator;
    poly denominator;
};

/// Sojourn time of an M/M/1 queue: Exp(mu - lambda).
inline sojourn_distribution mm1_sojourn(double lambda, double mu) {
    if (!(lambda < mu))
        throw instability_error("M/M/1 queue requires lambda < mu (lambda=" +
                                std::to_string(lambda) + ", mu=" + std::to_string(mu) + ")");
    if (lambda < 0.0) throw validation_error("arrival rate must be >= 0");
    sojourn_distribution out;
    out.form = sojourn_distribution::kind::analytic_exponential;
    out.rate = mu - lambda;
    return out;
}

namespace detail {

/// Waiting-time CDF of the M/D/1 queue by the classical finite sum
/// P(W <= t) = (1-rho) * sum_{k=0}^{floor(t/D)} (lambda(kD-t))^k / k! * e^{-lambda(kD-t)}.
/// The terms alternate in sign and grow like e^{lambda t}, so the sum is
/// accumulated in extended precision; usable while lambda*t stays below
/// roughly 30, which covers every utilization exercised here.
inline double md1_wait_cdf(double t, double lambda, double mu) {
    const double d = 1.0 / mu;
    const double rho = lambda / mu;
    if (t < 0.0) return 0.0;
    const auto kmax = static_cast<long>(std::floor(t / d + 1e-12));
    long double sum = 0.0L;
    for (long k = 0; k <= kmax; ++k) {
        const long double x = static_cast<long double>(lambda) * (k * d - t);  // <= 0
        long double term;
        if (x == 0.0L) {
            term = (k == 0) ? 1.0L : 0.0L;
        } else {
            const long double lt = k * std::log(-x) - x - std::lgamma(static_cast<long double>(k) + 1.0L);
            term = std::exp(lt);
            if (k % 2 == 1) term = -term;
        }
        sum += term;
    }
    return static_cast<double>((1.0L - rho) * sum);
}

inline void clamp_and_monotonize(std::vector<double>& cdf) {
    double prev = 0.0;
    for (double& v : cdf) {
        v = std::min(1.0, std::max(v, prev));
        prev = v;
    }
}

/// Differentiates a tabulated CDF into a pdf by central differences.
inline std::vector<double> pdf_from_cdf(const std::vector<double>& cdf, double h) {
    std::vector<double> pdf(cdf.size(), 0.0);
    if (cdf.size() < 2) return pdf;
    pdf[0] = (cdf[1] - cdf[0]) / h;
    for (std::size_t i = 1; i + 1 < cdf.size(); ++i)
        pdf[i] = (cdf[i + 1] - cdf[i - 1]) / (2.0 * h);
    pdf.back() = (cdf[cdf.size() - 1] - cdf[cdf.size() - 2]) / h;
    return pdf;
}

} // namespace detail

/// Sojourn time of an M/D/1 queue (deterministic service D = 1/mu),
/// tabulated on a uniform grid. The waiting-time law is evaluated by the
/// exact series above and shifted by the service time.
inline sojourn_distribution md1_sojourn(double lambda, double mu, grid_spec grid = {}) {
    if (!(lambda < mu))
        throw instability_error("M/D/1 queue requires lambda < mu");
    if (lambda < 0.0) throw validation_error("arrival rate must be >= 0");

    const double d = 1.0 / mu;
    const double h = grid.step > 0.0 ? grid.step : default_grid_step(mu - lambda);
    const bool fixed_horizon = grid.horizon > 0.0;

    // Mean plus a generous multiple of the exponential tail scale makes a
    // good first guess; double until the tail mass is below 1e-6.
    double horizon = fixed_horizon
        ? grid.horizon
        : std::max(4.0 * d, 8.0 * (d + 0.5 * lambda * d * d / (1.0 - lambda * d)));
    for (;;) {
        if (lambda * horizon > 30.0)
            throw horizon_error("M/D/1 series loses precision before reaching the "
                                "1e-6 tail; utilization too close to 1");
        const double tail = 1.0 - detail::md1_wait_cdf(horizon - d, lambda, mu);
        if (tail <= 1e-6) break;
        if (fixed_horizon)
            throw horizon_error("M/D/1 horizon " + std::to_string(horizon) +
                                " too small: tail mass " + std::to_string(tail) +
                                "; increase the horizon");
        horizon *= 2.0;
    }

    const auto n = static_cast<std::size_t>(std::ceil(horizon / h)) + 1;
    sojourn_distribution out;
    out.form = sojourn_distribution::kind::tabulated;
    out.tab.step = h;
    out.tab.cdf.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        out.tab.cdf[i] = detail::md1_wait_cdf(static_cast<double>(i) * h - d, lambda, mu);
    detail::clamp_and_monotonize(out.tab.cdf);
    out.tab.pdf = detail::pdf_from_cdf(out.tab.cdf, h);
    return out;
}

namespace detail {

/// One queue's factor of the batch-arrival path transform, as a ratio of
/// polynomials in s with the shared root at s = 0 already cancelled:
///
///   f_i(s) = (1-rho_i) mu_i Ntil(s) / (gbar ((mu_i+s)^G - lambda_i Ntil(s)))
///
/// where Ntil(s) = N(s)/s and N(s) = (mu+s)^G - sum_n g_n mu^n (mu+s)^{G-n}.
/// This is the Laplace-Stieltjes transform of the sojourn time of a tagged
/// vehicle in an M^X/M/1 FIFO queue: the stationary queue-length generating
/// function composed at mu/(mu+s), times the transform of the wait behind
/// same-batch predecessors and of the vehicle's own service. The composition
/// was validated against batch discrete-event simulation; see the tests.
inline rational_transform mxm1_queue_factor(double lambda, double mu, const batch_pmf& pmf) {
    const auto g = static_cast<int>(pmf.max_size());
    const double gbar = pmf.mean();
    const double rho = lambda * gbar / mu;
    if (!(rho < 1.0))
        throw instability_error("batch queue requires lambda*gbar < mu");

    poly n = poly_binomial_power(mu, g);
    for (int k = 1; k <= g; ++k) {
        poly term = poly_scale(poly_binomial_power(mu, g - k),
                               pmf.probs()[static_cast<std::size_t>(k - 1)] * std::pow(mu, k));
        n = poly_add(n, poly_scale(term, -1.0));
    }
    // N(0) = mu^G (1 - sum g_n) = 0 analytically; drop the fp residue.
    n[0] = 0.0;
    poly ntil = poly_deflate_at_zero(n);

    rational_transform out;
    out.numerator = poly_scale(ntil, (1.0 - rho) * mu);
    // gbar ((mu+s)^G - lambda Ntil)
    out.denominator = poly_scale(poly_add(poly_binomial_power(mu, g), poly_scale(ntil, -lambda)), gbar);
    return out;
}

} // namespace detail

/// Laplace transform of the travel-time CDF along a path of M^X/M/1 queues
/// sharing one batch-size pmf: (1/s) times the product of per-queue sojourn
/// transforms. Assembled with the per-queue factors kept in their raw form
/// (numerator degree G per queue, denominator degree G+1 per queue plus the
/// leading 1/s), so the returned denominator has degree 1 + |w|(G+1).
inline rational_transform mxm1_path_transform(const std::vector<double>& lambdas,
                                              const std::vector<double>& mus,
                                              const batch_pmf& pmf) {
    if (lambdas.empty() || lambdas.size() != mus.size())
        throw validation_error("path transform needs matching, non-empty rate lists");
    if (pmf.probs().empty())
        throw validation_error("batch pmf must be non-empty");

    rational_transform out;
    out.numerator = {1.0};
    out.denominator = {0.0, 1.0};  // the 1/s factor
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        rational_transform f = detail::mxm1_queue_factor(lambdas[i], mus[i], pmf);
        // restore the cancelled s in both places to keep the documented degrees
        poly num_s(f.numerator.size() + 1, 0.0);
        for (std::size_t j = 0; j < f.numerator.size(); ++j) num_s[j + 1] = f.numerator[j];
        poly den_s(f.denominator.size() + 1, 0.0);
        for (std::size_t j = 0; j < f.denominator.size(); ++j) den_s[j + 1] = f.denominator[j];
        out.numerator = poly_mul(out.numerator, num_s);
        out.denominator = poly_mul(out.denominator, den_s);
    }

    // keep coefficients in a sane range; the ratio is unchanged
    double scale = 0.0;
    for (double c : out.denominator) scale = std::max(scale, std::abs(c));
    if (scale > 0.0) {
        out.numerator = poly_scale(out.numerator, 1.0 / scale);
        out.denominator = poly_scale(out.denominator, 1.0 / scale);
    }
    return out;
}

} // namespace roadq

#endif
