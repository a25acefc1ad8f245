#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ordinalenc/encoding.hpp"

namespace ordinalenc {

struct GradCheckOptions {
    std::uint64_t seed = 0;
    int trials = 20;
    double step = 1e-5;
    double threshold = 1e-4;
    // Elements whose analytic and numeric values are both below this are
    // compared absolutely against it instead of relatively.
    double absolute_floor = 1e-8;
    // Negative control: corrupts one analytic gradient element per trial.
    bool perturb = false;
};

struct GradCheckResult {
    std::string suite;        // e.g. "loss/soft", "model/soft+aux"
    int trials = 0;
    std::size_t compared = 0; // elements compared
    std::size_t skipped = 0;  // elements whose stencil crossed a ReLU kink
    double worst_error = 0.0;
    bool passed = false;
};

// Relative error with the absolute floor described above.
double gradient_error(double analytic, double numeric, double absolute_floor);

// Central finite differences of the per-sample loss w.r.t. logits.
GradCheckResult check_loss_gradients(Family family, const GradCheckOptions& options);

// Central finite differences of the combined multi-branch loss w.r.t. every
// model parameter, on small random models.
GradCheckResult check_model_gradients(Family family, bool with_aux, const GradCheckOptions& options);

// All families for the loss, and all families with and without the
// auxiliary branches for the model. `only` restricts to one family.
std::vector<GradCheckResult> run_gradcheck(const GradCheckOptions& options, std::optional<Family> only = std::nullopt);

}  // namespace ordinalenc
