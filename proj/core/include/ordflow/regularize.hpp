#pragma once

#include <vector>

#include "ordflow/grid.hpp"

namespace ordflow {

// phi^eps(x) = max over grid offsets y of phi(x - y) - |y|/eps, per component.
// Reads outside the grid use the nearest boundary node.
GridFunction sup_convolution(const GridFunction& phi, double eps);
// phi_eps(x) = min over grid offsets y of phi(x - y) + |y|/eps.
GridFunction inf_convolution(const GridFunction& phi, double eps);

enum class KernelSide {
  upper,  // supported in (-2eps, 0)^d: averages values to the right, so >= phi for increasing phi
  lower   // supported in (0, 2eps)^d
};

// Discrete one-sided bump kernel on a grid. Offsets along axis a run over
// i*h_a for i = 1..k_a-1 with k_a = round(2 eps / h_a); weights sum to exactly one.
class MollifierKernel {
 public:
  MollifierKernel(const Grid& grid, double eps, KernelSide side);

  double eps() const { return eps_; }
  KernelSide side() const { return side_; }
  std::size_t dim() const { return steps_.size(); }
  std::size_t steps(std::size_t axis) const { return steps_[axis]; }
  double spacing(std::size_t axis) const { return spacing_[axis]; }
  // Tensor weights over the (k_0-1) x ... x (k_{d-1}-1) interior offsets, axis 0 fastest.
  const std::vector<double>& weights() const { return weights_; }

 private:
  double eps_;
  KernelSide side_;
  std::vector<std::size_t> steps_;
  std::vector<double> spacing_;
  std::vector<double> weights_;
};

// Smooth bump on (-1, 1), exp(-1/(1 - z^2)), unnormalized.
double bump(double z);

GridFunction one_sided_mollify(const GridFunction& phi, const MollifierKernel& kernel);

enum class RegularizationMethod { sup_conv, inf_conv, mollify_upper, mollify_lower };

struct RegularizedFunction {
  GridFunction source;
  RegularizationMethod method;
  double eps;
  GridFunction value;
};

RegularizedFunction regularize(const GridFunction& phi, RegularizationMethod method, double eps);

}  // namespace ordflow
