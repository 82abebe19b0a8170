#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hj/scheme.hpp"

namespace hj {

/**
 * Named initial data families:
 *
 *  - "constant":        v0 = b
 *  - "affine":          v0 = a . x + b
 *  - "neg_l1_norm":     v0 = -sum_j |x_j|      (kink at the origin)
 *  - "cosine":          v0 = sum_j cos(2 pi x_j) / (2 pi)
 *  - "random_lipschitz": multilinear interpolation of seeded node values
 *    on a coarse periodic grid, scaled so every axis slope stays within
 *    `lip`; fully determined by (dim, lip, period, coarse, seed).
 */
struct InitialDataSpec {
    std::string name = "constant";
    std::vector<double> a;
    double b = 0.0;
    double lip = 1.0;
    double period = 2.0;
    int coarse = 4;
    std::uint64_t seed = 1;
};

InitialData make_initial_data(const InitialDataSpec& spec, int dim);

/// Componentwise gradient bound of the data (the r fed to the scheme
/// constants).
double lipschitz_bound(const InitialDataSpec& spec, int dim);

/// Bound for |v0| over the box |x|_inf <= radius (the R fed to the scheme
/// constants).
double value_bound(const InitialDataSpec& spec, int dim, double radius);

} // namespace hj
