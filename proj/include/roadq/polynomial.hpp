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

#ifndef ROADQ_POLYNOMIAL_HPP
#define ROADQ_POLYNOMIAL_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "roadq/errors.hpp"

namespace roadq {

/// Dense univariate polynomial, coefficients stored lowest degree first.
using poly = std::vector<double>;

inline void poly_trim(poly& p, double eps = 0.0) {
    while (p.size() > 1 && std::abs(p.back()) <= eps) p.pop_back();
}

inline int poly_degree(const poly& p) {
    return static_cast<int>(p.size()) - 1;
}

inline double poly_eval(const poly& p, double x) {
    double acc = 0.0;
    for (std::size_t i = p.size(); i-- > 0;) acc = acc * x + p[i];
    return acc;
}

inline std::complex<double> poly_eval(const poly& p, std::complex<double> x) {
    std::complex<double> acc = 0.0;
    for (std::size_t i = p.size(); i-- > 0;) acc = acc * x + p[i];
    return acc;
}

inline poly poly_mul(const poly& a, const poly& b) {
    poly out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j)
            out[i + j] += a[i] * b[j];
    return out;
}

inline poly poly_add(const poly& a, const poly& b) {
    poly out(std::max(a.size(), b.size()), 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) out[i] += a[i];
    for (std::size_t i = 0; i < b.size(); ++i) out[i] += b[i];
    return out;
}

inline poly poly_scale(poly p, double s) {
    for (double& c : p) c *= s;
    return p;
}

inline poly poly_derivative(const poly& p) {
    if (p.size() <= 1) return {0.0};
    poly out(p.size() - 1);
    for (std::size_t i = 1; i < p.size(); ++i)
        out[i - 1] = p[i] * static_cast<double>(i);
    return out;
}

/// (c + s)^n expanded by the binomial theorem.
inline poly poly_binomial_power(double c, int n) {
    poly out{1.0};
    poly lin{c, 1.0};
    for (int i = 0; i < n; ++i) out = poly_mul(out, lin);
    return out;
}

/// Divides by the monomial s, i.e. drops the constant term. The caller
/// guarantees the constant term is analytically zero; whatever floating
/// point residue is left there gets discarded.
inline poly poly_deflate_at_zero(const poly& p) {
    if (p.size() <= 1) return {0.0};
    return poly(p.begin() + 1, p.end());
}

/// Roots of a polynomial via the eigenvalues of its companion matrix.
/// Standard approach for the small degrees used here (a few dozen at most);
/// the matrix is balanced by Eigen's Schur decomposition internally.
inline std::vector<std::complex<double>> poly_roots(const poly& p_in) {
    poly p = p_in;
    poly_trim(p);
    const int degree = poly_degree(p);
    if (degree < 1) return {};
    if (degree == 1) return {{-p[0] / p[1], 0.0}};

    Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(degree, degree);
    for (int i = 1; i < degree; ++i) companion(i, i - 1) = 1.0;
    for (int i = 0; i < degree; ++i) companion(i, degree - 1) = -p[i] / p[degree];

    Eigen::EigenSolver<Eigen::MatrixXd> solver(companion, false);
    if (solver.info() != Eigen::Success)
        throw numerical_error("companion-matrix eigenvalue solve failed");

    std::vector<std::complex<double>> roots(degree);
    for (int i = 0; i < degree; ++i) roots[i] = solver.eigenvalues()(i);
    std::sort(roots.begin(), roots.end(), [](auto a, auto b) {
        if (a.real() != b.real()) return a.real() < b.real();
        return a.imag() < b.imag();
    });
    return roots;
}

} // namespace roadq

#endif
