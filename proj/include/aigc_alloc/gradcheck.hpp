#pragma once

#include <string>
#include <vector>

namespace aigc {

struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0;
    bool pass = false;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    std::string worst_name;
    double worst_err = 0.0;
    bool pass = false;
};

inline constexpr double kGradCheckTolerance = 1e-4;

// Central-finite-difference verification of every backward formula: MLP
// regression losses (tanh and relu), the elementwise-op graph used by the
// SAC/PPO losses, the critic regression, and the full K=2 denoising chain
// through the actor parameters. `inject_tanh_fault` flips the tanh
// derivative so tests can confirm the checker catches a broken gradient.
GradCheckReport run_gradcheck(bool inject_tanh_fault = false);

}  // namespace aigc
