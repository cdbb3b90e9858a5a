// Finite-difference certification of every hand-derived backward pass.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace nvx {

struct GradCheckEntry {
    std::string op;
    double worst_rel_error = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    bool all_pass = false;
};

// Central differences with step 1e-6 over dense, gru_cell, attention_step,
// masked_mse and the fully unrolled attention model (T = 4, dims 3/5/2).
// perturb deliberately corrupts one analytic gradient so the harness's
// sensitivity can be demonstrated.
GradCheckReport run_gradcheck_suite(std::uint64_t seed, bool perturb = false);

// {"ops": [{"op", "worst_rel_error", "tolerance", "pass"}...], "all_pass"}
std::string gradcheck_to_json(const GradCheckReport& r);

}  // namespace nvx
