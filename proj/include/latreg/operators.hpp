#pragma once

#include <functional>
#include <string>

#include "latreg/lattice.hpp"

namespace latreg {

using Kernel = std::function<double(double, double)>;
using Profile = std::function<double(double)>;

struct KernelSpec {
    Kernel kernel;
    Kernel lower, upper;  // optional bounds k^l <= k <= k^u
    std::string name;
};

// Midpoint nodes x_i = (i + 1/2)·dx.
Vec grid_nodes(Eigen::Index n, double dx);

KernelSpec gaussian_kernel(double sigma);
KernelSpec constant_kernel(double c);
KernelSpec linear_kernel();
KernelSpec table_kernel(Mat values, double dx);
KernelSpec with_multiplicative_bounds(KernelSpec spec, double eps);
KernelSpec with_additive_bounds(KernelSpec spec, double eps);

DenseOperator integral_operator(const KernelSpec& spec, Eigen::Index n, double dx);
BracketPair bracket_from_kernel_bounds(const KernelSpec& spec, Eigen::Index n, double dx,
                                       NormKind width_norm = NormKind::max);
BracketPair bracket_from_riemann(const KernelSpec& spec, Eigen::Index n, Eigen::Index coarse_factor,
                                 double dx, NormKind width_norm = NormKind::max);
BracketPair source_identification_bracket(const Profile& a_lower, const Profile& a_upper,
                                          Eigen::Index n, double dx,
                                          NormKind width_norm = NormKind::max);

}  // namespace latreg
