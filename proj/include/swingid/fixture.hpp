#pragma once

#include "swingid/model.hpp"

#include <cstdint>

namespace swingid {

/// Parameters of the synthetic generator-only test network: N points drawn
/// uniformly in the unit square, a line between every pair closer than
/// `radius`, and per-line / per-generator values drawn uniformly from the
/// given ranges. Draws whose Euler map at `stability_dt` has a non-zero mode
/// with modulus >= `max_modulus` are rejected and redrawn.
struct FixtureSpec {
    int n_gen = 10;
    double radius = 0.4;
    double inertia_min = 0.5;
    double inertia_max = 5.0;
    double damping_min = 0.5;
    double damping_max = 2.0;
    double beta_min = 2.0;
    double beta_max = 15.0;
    double sigma_p = 0.01;
    double stability_dt = 1.0 / 60.0;
    double max_modulus = 0.9995;
    std::uint64_t seed = 1;
    int max_attempts = 100000;
};

GridModel random_geometric_fixture(const FixtureSpec& spec);

}  // namespace swingid
