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

#ifndef ROADQ_ERRORS_HPP
#define ROADQ_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace roadq {

/// Base class for all roadq exceptions.
class error : public std::runtime_error {
public:
    explicit error(const std::string& what) : std::runtime_error(what) {}
};

/// A scenario file or in-memory topology/policy violates a structural
/// invariant. The message names the offending entity (JSON key path for
/// file input).
class validation_error : public error {
public:
    explicit validation_error(const std::string& what) : error(what) {}
};

/// One or more queues would be driven at utilization >= 1.
class instability_error : public error {
public:
    instability_error(const std::string& what, std::vector<std::string> queues)
        : error(what), unstable_queues(std::move(queues)) {}
    explicit instability_error(const std::string& what) : error(what) {}

    std::vector<std::string> unstable_queues;
};

/// No feasible assignment exists (e.g. whole-flow matching cannot keep
/// every queue stable).
class infeasibility_error : public error {
public:
    explicit infeasibility_error(const std::string& what) : error(what) {}
};

/// A numerical routine failed beyond recovery (root finding, transform
/// inversion, quadrature horizon).
class numerical_error : public error {
public:
    explicit numerical_error(const std::string& what) : error(what) {}
};

/// The requested tabulation horizon cannot reach the demanded CDF mass.
class horizon_error : public numerical_error {
public:
    explicit horizon_error(const std::string& what) : numerical_error(what) {}
};

} // namespace roadq

#endif
