// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iterator>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "favoa/tensor.hpp"

namespace favoa {

struct GradientCheckReport {
  struct Element {
    std::string parameter;
    std::size_t index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    double relative_error = 0.0;
  };
  std::vector<Element> elements;
  double max_relative_error = 0.0;
  std::string worst_parameter;
  double tolerance = 0.0;

  bool passed() const { return max_relative_error < tolerance; }
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// |a - b| / max(|a|, |b|, 1e-8)
inline double guarded_relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

/// Compares analytic gradients of a scalar function against central
/// differences for every element of every listed leaf. `loss` must rebuild
/// its graph from the current leaf values on every call. With
/// `max_per_leaf` > 0 only that many elements per leaf are probed, chosen by
/// a generator seeded with `sample_seed`.
inline GradientCheckReport finite_difference_check(const std::function<Tensor()>& loss,
                                                   std::vector<NamedTensor> leaves,
                                                   double step = 1e-5, double tol = 1e-4,
                                                   std::size_t max_per_leaf = 0,
                                                   std::uint64_t sample_seed = 0) {
  for (auto& leaf : leaves) {
    require(leaf.tensor.is_leaf(), "finite_difference_check: '", leaf.name, "' is not a leaf");
    leaf.tensor.set_requires_grad(true);
    leaf.tensor.zero_grad();
  }
  const Tensor value = loss();
  require(value.size() == 1, "finite_difference_check: function must be scalar-valued");
  backward(value);

  GradientCheckReport report;
  report.tolerance = tol;
  std::mt19937_64 sampler(sample_seed);
  for (auto& leaf : leaves) {
    const std::vector<double> analytic(leaf.tensor.grad().begin(), leaf.tensor.grad().end());
    auto values = leaf.tensor.mutable_data();
    std::vector<std::size_t> probe(values.size());
    std::iota(probe.begin(), probe.end(), std::size_t{0});
    if (max_per_leaf > 0 && probe.size() > max_per_leaf) {
      std::vector<std::size_t> picked;
      std::sample(probe.begin(), probe.end(), std::back_inserter(picked), max_per_leaf, sampler);
      probe = std::move(picked);
    }
    for (std::size_t i : probe) {
      const double original = values[i];
      values[i] = original + step;
      const double up = loss().item();
      values[i] = original - step;
      const double down = loss().item();
      values[i] = original;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic.empty() ? 0.0 : analytic[i];
      const double err = guarded_relative_error(a, numeric);
      report.elements.push_back({leaf.name, i, a, numeric, err});
      if (report.worst_parameter.empty() || err > report.max_relative_error) {
        report.max_relative_error = err;
        report.worst_parameter = leaf.name;
      }
    }
    leaf.tensor.zero_grad();
  }
  return report;
}

/// Single-input form: checks d f(x) / dx.
inline GradientCheckReport finite_difference_check(const std::function<Tensor(const Tensor&)>& f,
                                                   Tensor x, double step = 1e-5,
                                                   double tol = 1e-4) {
  Tensor leaf = x.is_leaf() ? x : x.detach();
  return finite_difference_check([&] { return f(leaf); }, {{"x", leaf}}, step, tol);
}

}  // namespace favoa
