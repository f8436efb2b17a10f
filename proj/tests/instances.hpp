#pragma once

#include "levyband/band_solver.hpp"
#include "levyband/model.hpp"

namespace levyband::testing {

struct Instance {
    const char* name;
    ModelParams model;
    CostParams costs;
};

inline ModelParams bm_jump(double sigma, double theta, double lambda, double rho) {
    ModelParams m;
    m.mu = 0.0;
    m.sigma = sigma;
    m.jump_rate = 1.0;
    m.jump_scale = theta;
    m.discount = lambda;
    m.target = rho;
    return m;
}

inline Instance symmetric() { return {"symmetric", bm_jump(1, 1, 1, 0), {1, 0.1, 1, 0.1}}; }
inline Instance no_proportional() { return {"no_proportional", bm_jump(1, 1, 1, 0), {1, 0, 1, 0}}; }
inline Instance asymmetric() { return {"asymmetric", bm_jump(0.5, 2, 2, 1), {0.5, 0.2, 2, 0.05}}; }

// Drift plus compound Poisson with no diffusion.
inline ModelParams drift_jump(double drift, double theta) {
    ModelParams m;
    m.mu = drift;
    m.sigma = 0.0;
    m.jump_rate = 1.0;
    m.jump_scale = theta;
    return m;
}

}  // namespace levyband::testing
