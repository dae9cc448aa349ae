#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fairdca {

// Base error for invalid inputs and violated invariants.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Maximum-likelihood fit diverged (quasi-complete separation).
struct SeparationError : Error {
    using Error::Error;
};

// Iterative procedure ran out of iterations.
struct ConvergenceError : Error {
    using Error::Error;
};

// Numerically stable inverse logit / logit.
double expit(double x);
double logit(double p);

// log(1 + exp(x)) without overflow.
double log1pexp(double x);

// Linear-interpolation quantile of a sorted vector, q in [0, 1].
double quantile_sorted(const std::vector<double>& sorted, double q);

// Format a double with the given number of significant digits (reports use 12).
std::string format_sig(double x, int digits = 12);

// Runs body(i) for i in [0, n) on up to `workers` threads. Each index must
// write only to its own output slot; execution order is unspecified, so any
// downstream reduction has to happen in index order to stay deterministic.
void parallel_for(std::size_t n, int workers,
                  const std::function<void(std::size_t)>& body);

}  // namespace fairdca
