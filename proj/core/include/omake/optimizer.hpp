#pragma once

#include <cstddef>
#include <vector>

#include "omake/graph.hpp"
#include "omake/param_store.hpp"

namespace omake::numerics {

struct AdamWConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;    // decoupled, applied to the raw parameter
    std::size_t warmup_steps = 0; // linear warmup, then constant
};

// AdamW with linear warmup. Moment buffers are laid out in the parameter
// store's entry order.
class AdamW {
public:
    explicit AdamW(AdamWConfig cfg) : cfg_(cfg) {}

    // Effective learning rate at a 1-based step index.
    double learning_rate_at(std::size_t step) const;

    // One update over every parameter that has a gradient in `grads`.
    // Throws NumericError on a non-finite gradient.
    void step(ParamStore& params, const GradientMap& grads);

    std::size_t steps_done() const { return steps_; }
    const AdamWConfig& config() const { return cfg_; }

private:
    struct Slot {
        std::vector<double> m;
        std::vector<double> v;
    };

    AdamWConfig cfg_;
    std::vector<Slot> slots_;
    std::size_t steps_ = 0;
};

} // namespace omake::numerics
