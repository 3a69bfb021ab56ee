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

#ifndef ROADQ_TRAVEL_TIME_HPP
#define ROADQ_TRAVEL_TIME_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <tuple>
#include <vector>

#include "roadq/errors.hpp"
#include "roadq/laplace.hpp"
#include "roadq/polynomial.hpp"
#include "roadq/queue_models.hpp"
#include "roadq/topology.hpp"

namespace roadq {

constexpr double kPoleMergeRelTolerance = 1e-9;
constexpr double kCoefficientGuard = 1e12;
constexpr double kCdfTailTolerance = 1e-4;
constexpr std::size_t kMaxGridPoints = std::size_t(1) << 23;

/// One summand of a closed-form CDF: coeff * t^power * exp(-rate * t).
/// The implicit constant 1 is not stored; see path_travel_time::cdf_at.
struct exp_term {
    double coeff = 0.0;
    double rate = 0.0;
    int power = 0;
};

/// Travel-time CDF of one path, either as exponential terms (all-Markovian
/// paths) or as a grid tabulation.
struct path_travel_time {
    enum class kind { closed_form, tabulated };

    kind form = kind::closed_form;
    std::vector<exp_term> terms;  // closed form: F(t) = 1 + sum of terms
    tabulated_distribution tab;
    bool numeric_fallback = false;  // set when ill-conditioned coefficients
                                    // forced the numeric route

    double cdf_at(double t) const {
        if (t <= 0.0) return 0.0;
        if (form == kind::tabulated) return tab.cdf_at(t);
        return 1.0 + term_sum(t);
    }

    /// Exceedance 1 - F(t), evaluated without forming 1 - (1 - eps).
    double exceedance_at(double t) const {
        if (t <= 0.0) return 1.0;
        if (form == kind::tabulated)
            return std::min(1.0, std::max(0.0, 1.0 - tab.cdf_at(t)));
        return std::min(1.0, std::max(0.0, -term_sum(t)));
    }

    double term_sum(double t) const {
        double acc = 0.0;
        for (const exp_term& term : terms)
            acc += term.coeff * std::pow(t, term.power) * std::exp(-term.rate * t);
        return acc;
    }
};

/// Per-path and per-flow exceedance probabilities and the min-max objective.
struct flow_exceedance {
    std::vector<std::vector<double>> per_path_delta;  // [flow][slot]
    std::vector<double> per_flow_delta;               // [flow]
    double objective = 0.0;
    bool used_numeric_fallback = false;
};

namespace detail {

struct pole_cluster {
    double rate = 0.0;
    int multiplicity = 0;
};

inline std::vector<pole_cluster> cluster_rates(std::vector<double> rates) {
    std::sort(rates.begin(), rates.end());
    const double scale = std::max(rates.back(), 1e-300);
    std::vector<pole_cluster> out;
    for (double d : rates) {
        if (!out.empty() &&
            std::abs(d - out.back().rate) <= kPoleMergeRelTolerance * scale) {
            // running mean keeps the representative centred
            pole_cluster& c = out.back();
            c.rate = (c.rate * c.multiplicity + d) / (c.multiplicity + 1);
            c.multiplicity++;
        } else {
            out.push_back({d, 1});
        }
    }
    return out;
}

/// Partial-fraction residues for F(s) = K / (s prod_c (s + d_c)^{m_c}),
/// K = prod_c d_c^{m_c}. For cluster c the coefficients B_{c,r} of
/// 1/(s+d_c)^r, r = 1..m_c, come from derivatives of
/// G(s) = K / (s prod_{c' != c}(s + d_{c'})^{m_{c'}}) at s = -d_c, built by
/// the product rule on log G (whose derivatives are elementary).
inline std::vector<exp_term> hypoexp_terms(const std::vector<pole_cluster>& clusters) {
    long double log_k = 0.0L;
    for (const pole_cluster& c : clusters)
        log_k += c.multiplicity * std::log(static_cast<long double>(c.rate));

    std::vector<exp_term> terms;
    for (std::size_t ci = 0; ci < clusters.size(); ++ci) {
        const double dc = clusters[ci].rate;
        const int m = clusters[ci].multiplicity;
        const long double s = -static_cast<long double>(dc);

        // G(-dc) and its derivatives up to order m-1
        long double g0 = std::exp(log_k) / s;
        for (std::size_t cj = 0; cj < clusters.size(); ++cj) {
            if (cj == ci) continue;
            for (int r = 0; r < clusters[cj].multiplicity; ++r)
                g0 /= (s + clusters[cj].rate);
        }
        std::vector<long double> g{g0};
        auto log_deriv = [&](int n) {
            long double acc = 1.0L / std::pow(s, n);
            for (std::size_t cj = 0; cj < clusters.size(); ++cj) {
                if (cj == ci) continue;
                acc += clusters[cj].multiplicity /
                       std::pow(s + clusters[cj].rate, n);
            }
            long double fact = 1.0L;
            for (int i = 1; i < n; ++i) fact *= i;
            return ((n % 2 == 0) ? fact : -fact) * acc;
        };
        for (int n = 1; n < m; ++n) {
            long double acc = 0.0L;
            long double binom = 1.0L;
            for (int j = 0; j < n; ++j) {
                acc += binom * log_deriv(j + 1) * g[static_cast<std::size_t>(n - 1 - j)];
                binom = binom * (n - 1 - j) / (j + 1);
            }
            g.push_back(acc);
        }

        for (int r = m; r >= 1; --r) {
            // B_{c,r} = G^{(m-r)}(-dc) / (m-r)!; the inverse transform of
            // B/(s+d)^r is B t^{r-1} e^{-dt} / (r-1)!.
            long double fact_mr = 1.0L;
            for (int i = 2; i <= m - r; ++i) fact_mr *= i;
            long double fact_r1 = 1.0L;
            for (int i = 2; i <= r - 1; ++i) fact_r1 *= i;
            const long double b = g[static_cast<std::size_t>(m - r)] / fact_mr;
            terms.push_back({static_cast<double>(b / fact_r1), dc, r - 1});
        }
    }
    return terms;
}

/// Horizon at which the slowest closed-form mode has decayed to ~1e-7.
inline double closed_form_horizon(const std::vector<exp_term>& terms) {
    double dmin = 1e300;
    int pmax = 0;
    for (const exp_term& e : terms) {
        dmin = std::min(dmin, e.rate);
        pmax = std::max(pmax, e.power);
    }
    return (16.0 + 4.0 * pmax) / dmin;
}

inline void validate_closed_form(const path_travel_time& ptt) {
    const double horizon = closed_form_horizon(ptt.terms);
    const int n = 1200;
    double prev = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double t = horizon * i / n;
        const double f = ptt.cdf_at(t);
        if (i == 0 && std::abs(f) > 1e-7)
            throw numerical_error("closed-form CDF does not start at 0");
        if (f < prev - 1e-9)
            throw numerical_error("closed-form CDF is not non-decreasing");
        prev = std::max(prev, f);
    }
    if (prev < 1.0 - kCdfTailTolerance)
        throw numerical_error("closed-form CDF does not reach 1 at its horizon");
}

} // namespace detail

/// Closed-form travel-time CDF of an all-M/M/1 path with the given slacks
/// d_i = mu_i - lambda_i. Distinct slacks give the alternating-sign
/// exponential mixture; slacks closer than the relative merge tolerance are
/// collapsed into one pole of higher multiplicity, which contributes
/// polynomial-in-t terms (for a double pole at d the CDF is
/// 1 - e^{-dt}(dt+1)).
inline path_travel_time path_cdf_mm1_slacks(const std::vector<double>& slacks) {
    if (slacks.empty()) throw validation_error("path has no queues");
    for (double d : slacks)
        if (!(d > 0.0)) throw instability_error("path requires mu > lambda at every queue");

    path_travel_time out;
    out.form = path_travel_time::kind::closed_form;
    out.terms = detail::hypoexp_terms(detail::cluster_rates(slacks));
    detail::validate_closed_form(out);
    return out;
}

/// Largest |coefficient| of a closed form; the numeric-difficulty guard.
inline double max_abs_coefficient(const path_travel_time& ptt) {
    double m = 0.0;
    for (const exp_term& e : ptt.terms) m = std::max(m, std::abs(e.coeff));
    return m;
}

inline path_travel_time path_cdf_mm1(const topology& t, int path_index,
                                     const arrival_rates& rates, const policy& pol) {
    std::vector<double> slacks;
    for (int q : t.path_queues[path_index]) {
        if (t.queues[q].model == queue_service::sink) continue;  // zero sojourn
        slacks.push_back(pol.service_rates[q] - rates.lambda[q]);
    }
    if (slacks.empty()) throw validation_error("path '" + t.paths[path_index].id +
                                               "' has only sink queues");
    return path_cdf_mm1_slacks(slacks);
}

namespace detail {

/// In-place iterative radix-2 FFT (Cooley-Tukey).
inline void fft(std::vector<std::complex<double>>& a, bool inverse) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    const double pi = 3.14159265358979323846;
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = 2.0 * pi / static_cast<double>(len) * (inverse ? -1.0 : 1.0);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse)
        for (auto& x : a) x /= static_cast<double>(n);
}

/// pdf of the sum: h * (f conv g), truncated to n points.
inline std::vector<double> convolve_pdfs(const std::vector<double>& f,
                                         const std::vector<double>& g, double h) {
    std::size_t n = f.size() + g.size() - 1;
    std::size_t m = 1;
    while (m < n) m <<= 1;
    std::vector<std::complex<double>> fa(m), ga(m);
    for (std::size_t i = 0; i < f.size(); ++i) fa[i] = f[i];
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i];
    fft(fa, false);
    fft(ga, false);
    for (std::size_t i = 0; i < m; ++i) fa[i] *= ga[i];
    fft(fa, true);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = fa[i].real() * h;
    return out;
}

/// Convolution with an exponential pdf rate*e^{-rate t}, exact for a
/// piecewise-linear integrand: g(t_n) = E g(t_{n-1}) + panel(f_{n-1}, f_n)
/// with E = e^{-rate h}. O(N) per queue, which keeps the all-Markovian
/// numeric route cheap at very fine grids.
inline std::vector<double> convolve_exponential(const std::vector<double>& f,
                                                double rate, double h) {
    const double a = rate * h;
    const double e = std::exp(-a);
    // w1 = int_0^h (u/h) r e^{-r(h-u)} du, w0 = int_0^h (1-u/h) r e^{-r(h-u)} du
    double one_me_over_a;
    if (a < 1e-5) one_me_over_a = 1.0 - a / 2.0 + a * a / 6.0;
    else one_me_over_a = (1.0 - e) / a;
    const double w1 = 1.0 - one_me_over_a;
    const double w0 = (1.0 - e) - w1;

    std::vector<double> out(f.size(), 0.0);
    for (std::size_t n = 1; n < f.size(); ++n)
        out[n] = e * out[n - 1] + w0 * f[n - 1] + w1 * f[n];
    return out;
}

inline std::vector<double> exponential_pdf_samples(double rate, double h, std::size_t n) {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = rate * std::exp(-rate * h * static_cast<double>(i));
    return out;
}

/// Resamples a tabulated pdf onto step h (linear interpolation).
inline std::vector<double> resample_pdf(const tabulated_distribution& tab, double h,
                                        std::size_t n) {
    std::vector<double> out(n, 0.0);
    const double horizon = tab.horizon();
    for (std::size_t i = 0; i < n; ++i) {
        const double t = h * static_cast<double>(i);
        if (t > horizon) break;
        const double x = t / tab.step;
        const auto j = static_cast<std::size_t>(x);
        if (j + 1 < tab.pdf.size()) {
            const double frac = x - static_cast<double>(j);
            out[i] = tab.pdf[j] * (1.0 - frac) + tab.pdf[j + 1] * frac;
        } else {
            out[i] = tab.pdf.back();
        }
    }
    return out;
}

inline std::vector<double> cumulative_trapezoid(const std::vector<double>& pdf, double h) {
    std::vector<double> cdf(pdf.size(), 0.0);
    for (std::size_t i = 1; i < pdf.size(); ++i)
        cdf[i] = cdf[i - 1] + 0.5 * h * (pdf[i - 1] + pdf[i]);
    return cdf;
}

} // namespace detail

/// Travel-time CDF of a path as the cumulative integral of the discrete
/// convolution of the per-queue sojourn pdfs on a common grid. Analytic
/// exponential factors are folded in by an O(N) recursion; tabulated factors
/// (with the grid auto-resampled on mismatch) by FFT.
inline path_travel_time path_cdf_numeric(const std::vector<const sojourn_distribution*>& sojourns,
                                         grid_spec grid = {}) {
    if (sojourns.empty()) throw validation_error("path has no queues");

    double mean_total = 0.0, max_rate = 0.0, min_rate = 1e300;
    for (const sojourn_distribution* s : sojourns) {
        mean_total += s->mean();
        if (s->form == sojourn_distribution::kind::analytic_exponential) {
            max_rate = std::max(max_rate, s->rate);
            min_rate = std::min(min_rate, s->rate);
        } else {
            max_rate = std::max(max_rate, 4.0 / std::max(s->mean(), 1e-9));
            min_rate = std::min(min_rate, 1.0 / std::max(s->mean(), 1e-9));
        }
    }
    const double h = grid.step > 0.0 ? grid.step : default_grid_step(max_rate);
    double horizon = grid.horizon > 0.0
        ? grid.horizon
        : 3.0 * mean_total + 16.0 / min_rate;

    for (;;) {
        const auto n = static_cast<std::size_t>(std::ceil(horizon / h)) + 1;
        if (n > kMaxGridPoints)
            throw horizon_error("numeric convolution grid would exceed " +
                                std::to_string(kMaxGridPoints) + " points");

        std::vector<double> pdf;
        bool first = true;
        for (const sojourn_distribution* s : sojourns) {
            if (first) {
                pdf = (s->form == sojourn_distribution::kind::analytic_exponential)
                    ? detail::exponential_pdf_samples(s->rate, h, n)
                    : detail::resample_pdf(s->tab, h, n);
                first = false;
            } else if (s->form == sojourn_distribution::kind::analytic_exponential) {
                pdf = detail::convolve_exponential(pdf, s->rate, h);
            } else {
                pdf = detail::convolve_pdfs(pdf, detail::resample_pdf(s->tab, h, n), h);
                pdf.resize(n);
            }
        }

        path_travel_time out;
        out.form = path_travel_time::kind::tabulated;
        out.tab.step = h;
        out.tab.pdf = std::move(pdf);
        out.tab.cdf = detail::cumulative_trapezoid(out.tab.pdf, h);
        detail::clamp_and_monotonize(out.tab.cdf);
        if (out.tab.cdf.back() >= 1.0 - kCdfTailTolerance) return out;
        if (grid.horizon > 0.0)
            throw horizon_error("numeric convolution horizon too small: cdf reaches only " +
                                std::to_string(out.tab.cdf.back()));
        horizon *= 2.0;
    }
}

namespace detail {

struct batch_factors {
    std::vector<poly> nums;  // deflated per-queue numerators
    std::vector<poly> dens;  // deflated per-queue denominators (degree G each)
};

inline batch_factors mxm1_deflated_factors(const std::vector<double>& lambdas,
                                           const std::vector<double>& mus,
                                           const batch_pmf& pmf) {
    batch_factors out;
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        rational_transform f = mxm1_queue_factor(lambdas[i], mus[i], pmf);
        out.nums.push_back(std::move(f.numerator));
        out.dens.push_back(std::move(f.denominator));
    }
    return out;
}

inline std::complex<double> eval_batch_transform(const batch_factors& f,
                                                 std::complex<double> s) {
    std::complex<double> v = 1.0 / s;
    for (std::size_t i = 0; i < f.nums.size(); ++i)
        v *= poly_eval(f.nums[i], s) / poly_eval(f.dens[i], s);
    return v;
}

} // namespace detail

/// Inverts the batch-arrival path transform into a tabulated CDF. Poles are
/// found per queue with the companion-matrix root finder; when all poles are
/// simple and well separated the CDF is the residue expansion evaluated on
/// the grid, otherwise (near-coincident roots, huge residues) the transform
/// is inverted numerically on the Talbot contour.
inline path_travel_time path_cdf_batch_rates(const std::vector<double>& lambdas,
                                             const std::vector<double>& mus,
                                             const batch_pmf& pmf, grid_spec grid = {}) {
    using cd = std::complex<double>;
    detail::batch_factors factors = detail::mxm1_deflated_factors(lambdas, mus, pmf);

    // full denominator roots: per-queue roots plus the explicit pole at 0
    std::vector<cd> poles{cd(0.0, 0.0)};
    bool roots_ok = true;
    for (const poly& den : factors.dens) {
        try {
            for (cd r : poly_roots(den)) poles.push_back(r);
        } catch (const numerical_error&) {
            roots_ok = false;
            break;
        }
    }

    double scale = 0.0;
    for (cd p : poles) scale = std::max(scale, std::abs(p));
    bool separated = roots_ok;
    if (roots_ok) {
        for (std::size_t i = 0; i < poles.size() && separated; ++i)
            for (std::size_t j = i + 1; j < poles.size(); ++j)
                if (std::abs(poles[i] - poles[j]) < 1e-7 * std::max(scale, 1.0)) {
                    separated = false;
                    break;
                }
        // transforms are stable iff every pole (except s=0) lies strictly left
        for (std::size_t i = 1; i < poles.size() && separated; ++i)
            if (poles[i].real() > -1e-12) separated = false;
    }

    // residues at simple poles: num(p) / den'(p)
    std::vector<cd> residues;
    bool conditioned = separated;
    if (separated) {
        // assemble full numerator and denominator once; degrees stay small
        poly num{1.0};
        poly den{0.0, 1.0};
        for (std::size_t i = 0; i < factors.nums.size(); ++i) {
            num = poly_mul(num, factors.nums[i]);
            den = poly_mul(den, factors.dens[i]);
        }
        const poly dden = poly_derivative(den);
        for (cd p : poles) {
            const cd r = poly_eval(num, p) / poly_eval(dden, p);
            residues.push_back(r);
            if (!std::isfinite(r.real()) || std::abs(r) > 1e8) conditioned = false;
        }
    }

    double mean_guess = 0.0, slowest = 0.0;
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        const double slack = mus[i] - lambdas[i] * pmf.mean();
        mean_guess += pmf.mean() / slack;
        slowest = std::max(slowest, 1.0 / slack);
    }
    const double h = grid.step > 0.0
        ? grid.step
        : default_grid_step(*std::max_element(mus.begin(), mus.end()));
    double horizon = grid.horizon > 0.0 ? grid.horizon
                                        : 6.0 * mean_guess + 12.0 * slowest;

    for (;;) {
        const auto n = static_cast<std::size_t>(std::ceil(horizon / h)) + 1;
        if (n > kMaxGridPoints)
            throw horizon_error("batch inversion grid would exceed limit");

        path_travel_time out;
        out.form = path_travel_time::kind::tabulated;
        out.tab.step = h;
        out.tab.cdf.resize(n);
        if (conditioned) {
            for (std::size_t i = 0; i < n; ++i) {
                const double t = h * static_cast<double>(i);
                cd acc = 0.0;
                for (std::size_t j = 0; j < poles.size(); ++j)
                    acc += residues[j] * std::exp(poles[j] * t);
                out.tab.cdf[i] = acc.real();
            }
        } else {
            out.numeric_fallback = true;
            for (std::size_t i = 0; i < n; ++i) {
                const double t = h * static_cast<double>(i);
                out.tab.cdf[i] = t == 0.0 ? 0.0 : talbot_invert(
                    [&](cd s) { return detail::eval_batch_transform(factors, s); }, t);
            }
        }
        detail::clamp_and_monotonize(out.tab.cdf);
        out.tab.pdf = detail::pdf_from_cdf(out.tab.cdf, h);
        if (out.tab.cdf.back() >= 1.0 - kCdfTailTolerance) return out;
        if (grid.horizon > 0.0)
            throw horizon_error("batch inversion horizon too small");
        horizon *= 2.0;
    }
}

inline path_travel_time path_cdf_batch(const topology& t, int path_index,
                                       const arrival_rates& rates, const policy& pol,
                                       const batch_pmf& pmf, grid_spec grid = {}) {
    std::vector<double> lambdas, mus;
    for (int q : t.path_queues[path_index]) {
        if (t.queues[q].model == queue_service::sink) continue;
        lambdas.push_back(rates.lambda[q]);
        mus.push_back(pol.service_rates[q]);
    }
    return path_cdf_batch_rates(lambdas, mus, pmf, grid);
}

/// Probability that the path's travel time exceeds t_hat.
inline double delta_w(const path_travel_time& ptt, double t_hat) {
    if (t_hat < 0.0) throw validation_error("threshold must be >= 0");
    return ptt.exceedance_at(t_hat);
}

/// Combines per-path exceedances into per-flow exceedances and the min-max
/// objective: delta^k = sum_w p_w^k delta_w(omega^k); objective = max_k delta^k.
inline flow_exceedance combine_exceedance(const topology& t, const policy& pol,
                                          const std::vector<std::vector<double>>& per_path_delta) {
    flow_exceedance out;
    out.per_path_delta = per_path_delta;
    out.per_flow_delta.assign(t.flows.size(), 0.0);
    for (int f = 0; f < t.n_flows(); ++f) {
        double acc = 0.0;
        for (std::size_t s = 0; s < t.flow_paths[f].size(); ++s)
            acc += pol.path_probs[f][s] * per_path_delta[f][s];
        out.per_flow_delta[f] = acc;
    }
    out.objective = *std::max_element(out.per_flow_delta.begin(), out.per_flow_delta.end());
    return out;
}

struct evaluate_options {
    grid_spec grid{};
};

/// Full analytic pipeline: arrival rates -> per-queue sojourns -> per-path
/// CDFs -> flow exceedances and the objective. All-Markovian paths use the
/// closed form unless its coefficients trip the conditioning guard, in which
/// case that path silently switches to the numeric convolution route and the
/// result is flagged. Per-queue sojourn tabulations are memoized within one
/// call (keyed on rate pairs); nothing is cached across calls.
inline flow_exceedance evaluate_objective(const topology& t, const policy& pol,
                                          const evaluate_options& opts = {}) {
    validate_policy(t, pol);
    const stability_report stab = check_stability(t, pol);
    if (!stab.all_stable)
        throw instability_error("policy drives queues to saturation: " +
                                detail::join_ids(stab.violating, ", "), stab.violating);
    const arrival_rates rates = compute_arrival_rates(t, pol);

    std::map<std::pair<double, double>, sojourn_distribution> sojourn_cache;
    auto queue_sojourn = [&](int q) -> const sojourn_distribution& {
        const double lam = rates.lambda[q];
        const double mu = pol.service_rates[q];
        auto it = sojourn_cache.find({lam, mu});
        if (it == sojourn_cache.end()) {
            sojourn_distribution s = (t.queues[q].model == queue_service::deterministic)
                ? md1_sojourn(lam, mu, opts.grid)
                : mm1_sojourn(lam, mu);
            it = sojourn_cache.emplace(std::make_pair(lam, mu), std::move(s)).first;
        }
        return it->second;
    };

    flow_exceedance out;
    std::vector<std::vector<double>> deltas(t.flows.size());
    for (int f = 0; f < t.n_flows(); ++f) {
        deltas[f].assign(t.flow_paths[f].size(), 0.0);
        const double omega = t.flows[f].omega;
        for (std::size_t s = 0; s < t.flow_paths[f].size(); ++s) {
            const int w = t.flow_paths[f][s];

            bool any_batch = false, any_det = false;
            const batch_pmf* pmf = nullptr;
            for (int q : t.path_queues[w]) {
                if (t.queues[q].model == queue_service::sink) continue;
                if (t.queues[q].model == queue_service::deterministic) any_det = true;
                if (t.queues[q].batch) {
                    if (pmf && pmf->probs() != t.queues[q].batch->probs())
                        throw validation_error("path '" + t.paths[w].id +
                                               "' mixes different batch pmfs");
                    pmf = &*t.queues[q].batch;
                    any_batch = true;
                }
            }
            if (any_batch && any_det)
                throw validation_error("batch arrivals with deterministic service "
                                       "are not supported");

            path_travel_time ptt;
            if (any_batch && !pmf->is_unit()) {
                ptt = path_cdf_batch(t, w, rates, pol, *pmf, opts.grid);
                out.used_numeric_fallback |= ptt.numeric_fallback;
            } else if (!any_det) {
                bool fall_back = false;
                try {
                    ptt = path_cdf_mm1(t, w, rates, pol);
                    fall_back = max_abs_coefficient(ptt) > kCoefficientGuard;
                } catch (const numerical_error&) {
                    fall_back = true;  // cancellation broke the closed form
                }
                if (fall_back) {
                    std::vector<const sojourn_distribution*> sj;
                    for (int q : t.path_queues[w])
                        if (t.queues[q].model != queue_service::sink)
                            sj.push_back(&queue_sojourn(q));
                    ptt = path_cdf_numeric(sj, opts.grid);
                    ptt.numeric_fallback = true;
                    out.used_numeric_fallback = true;
                }
            } else {
                std::vector<const sojourn_distribution*> sj;
                for (int q : t.path_queues[w])
                    if (t.queues[q].model != queue_service::sink)
                        sj.push_back(&queue_sojourn(q));
                ptt = path_cdf_numeric(sj, opts.grid);
            }
            deltas[f][s] = delta_w(ptt, omega);
        }
    }
    flow_exceedance combined = combine_exceedance(t, pol, deltas);
    combined.used_numeric_fallback = out.used_numeric_fallback;
    return combined;
}

/// Per-path closed-form or tabulated CDFs for reporting (the `evaluate` CLI
/// command dumps these as CSV).
inline std::vector<path_travel_time> all_path_cdfs(const topology& t, const policy& pol,
                                                   const evaluate_options& opts = {}) {
    const stability_report stab = check_stability(t, pol);
    if (!stab.all_stable)
        throw instability_error("policy drives queues to saturation: " +
                                detail::join_ids(stab.violating, ", "), stab.violating);
    const arrival_rates rates = compute_arrival_rates(t, pol);

    std::map<std::pair<double, double>, sojourn_distribution> cache;
    std::vector<path_travel_time> out;
    for (int w = 0; w < t.n_paths(); ++w) {
        bool any_det = false;
        const batch_pmf* pmf = nullptr;
        for (int q : t.path_queues[w]) {
            if (t.queues[q].model == queue_service::sink) continue;
            if (t.queues[q].model == queue_service::deterministic) any_det = true;
            if (t.queues[q].batch) pmf = &*t.queues[q].batch;
        }
        if (pmf && !pmf->is_unit()) {
            out.push_back(path_cdf_batch(t, w, rates, pol, *pmf, opts.grid));
        } else if (!any_det) {
            out.push_back(path_cdf_mm1(t, w, rates, pol));
        } else {
            std::vector<const sojourn_distribution*> sj;
            for (int q : t.path_queues[w]) {
                if (t.queues[q].model == queue_service::sink) continue;
                const double lam = rates.lambda[q];
                const double mu = pol.service_rates[q];
                auto it = cache.find({lam, mu});
                if (it == cache.end()) {
                    sojourn_distribution s = (t.queues[q].model == queue_service::deterministic)
                        ? md1_sojourn(lam, mu, opts.grid)
                        : mm1_sojourn(lam, mu);
                    it = cache.emplace(std::make_pair(lam, mu), std::move(s)).first;
                }
                sj.push_back(&it->second);
            }
            out.push_back(path_cdf_numeric(sj, opts.grid));
        }
    }
    return out;
}

} // namespace roadq

#endif
