#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "ssnf/graph.hpp"

namespace ssnf::testing {

// Central finite differences of a scalar graph output w.r.t. the given
// trainable leaves, compared against reverse-mode gradients. Returns the
// worst relative error across all checked components.
inline double gradient_check(Graph<double>& g, const std::vector<std::string>& leaves,
                             const std::string& output, double h = 1e-5) {
  g.run_forward();
  auto grads = g.backward(output, Tensor<double>::scalar(1.0));
  double worst = 0;
  for (const auto& name : leaves) {
    Tensor<double>& leaf = g.leaf_data(name);
    const Tensor<double>& ad = grads.at(name);
    for (int64_t i = 0; i < leaf.numel(); ++i) {
      const double saved = leaf[size_t(i)];
      leaf[size_t(i)] = saved + h;
      g.run_forward();
      const double fp = g.value(output)[0];
      leaf[size_t(i)] = saved - h;
      g.run_forward();
      const double fm = g.value(output)[0];
      leaf[size_t(i)] = saved;
      const double fd = (fp - fm) / (2 * h);
      const double a = ad[size_t(i)];
      const double rel = std::abs(a - fd) / (std::abs(a) + std::abs(fd) + 1e-6);
      worst = std::max(worst, rel);
    }
  }
  g.run_forward();  // restore clean forward state
  return worst;
}

}  // namespace ssnf::testing
