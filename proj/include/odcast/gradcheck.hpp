#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "odcast/params.hpp"

namespace odcast {

struct GradCheckEntry {
    std::string tensor;
    int index = 0;
    double analytic = 0.0;
    double finite_diff = 0.0;
    double rel_err = 0.0;
};

struct GradCheckReport {
    double max_rel_err = 0.0;
    int entries_checked = 0;
    bool pass = false;
    std::vector<GradCheckEntry> worst;  // up to 5 offenders, worst first
};

// loss_and_grad(params, grads): returns the loss; fills *grads with analytic
// gradients when grads is non-null. Central differences perturb one entry at
// a time; relative error uses max(|g|, |fd|, 1e-8) as denominator. Entries
// failing at the primary epsilon are re-probed at eps/4 and 4/32/256*eps and
// score their best estimate: a LeakyReLU kink inside the probe interval or
// rounding cancellation on a near-dead entry invalidates a single scale.
// Checks all entries when max_entries <= 0 or exceeds the total, otherwise a
// seeded sample of max_entries distinct entries. Throws on non-finite loss.
GradCheckReport grad_check(const std::function<double(const ModelParams&, GradientSet*)>& loss_and_grad,
                           const ModelParams& params, double epsilon, double tolerance,
                           int max_entries = 0, std::uint64_t seed = 0);

}  // namespace odcast
