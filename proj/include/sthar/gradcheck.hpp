#pragma once

// Central-difference gradient verification. Always run in 64-bit; float
// round-off makes h=1e-5 differences meaningless.

#include <functional>
#include <string>
#include <vector>

#include "sthar/param_store.hpp"
#include "sthar/tensor.hpp"

namespace sthar {

struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double max_rel_err = 0.0;

    bool passes(double tol) const { return max_rel_err < tol; }
};

inline double rel_err(double analytic, double numeric) {
    const double denom = std::max(std::max(std::abs(analytic), std::abs(numeric)), 1e-8);
    return std::abs(analytic - numeric) / denom;
}

// loss_fn must rebuild the graph from the current store contents on every
// call (define-by-run makes this natural).
inline GradCheckReport check_gradients(ParamStore<double>& store,
                                       const std::function<Tensor64()>& loss_fn,
                                       double h = 1e-5) {
    store.zero_grad();
    loss_fn().backward();

    // Snapshot analytic grads before the FD sweep perturbs anything.
    std::vector<std::vector<double>> analytic;
    for (auto& [name, t] : store) analytic.push_back(t.grad());

    GradCheckReport report;
    std::size_t pi = 0;
    for (auto& [name, t] : store) {
        GradCheckEntry entry{name, 0.0};
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double orig = t.data()[i];
            t.data()[i] = orig + h;
            const double lp = loss_fn().item();
            t.data()[i] = orig - h;
            const double lm = loss_fn().item();
            t.data()[i] = orig;
            const double fd = (lp - lm) / (2 * h);
            entry.max_rel_err = std::max(entry.max_rel_err, rel_err(analytic[pi][i], fd));
        }
        report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
        report.entries.push_back(std::move(entry));
        ++pi;
    }
    return report;
}

}  // namespace sthar
