#include "omake/optimizer.hpp"

#include <cmath>

#include "omake/errors.hpp"

namespace omake::numerics {

double AdamW::learning_rate_at(std::size_t step) const {
    if (cfg_.warmup_steps > 0 && step < cfg_.warmup_steps) {
        return cfg_.learning_rate * static_cast<double>(step) /
               static_cast<double>(cfg_.warmup_steps);
    }
    return cfg_.learning_rate;
}

void AdamW::step(ParamStore& params, const GradientMap& grads) {
    if (slots_.size() != params.count()) slots_.resize(params.count());

    // Validate everything before touching any parameter, so an abort leaves
    // the store at the last good step.
    for (const auto& [name, tensor] : params.entries()) {
        auto it = grads.find(name);
        if (it == grads.end()) continue;
        if (!it->second.same_shape(tensor)) {
            throw DimensionError("adamw: gradient shape " + shape_str(it->second.shape()) +
                                 " does not match parameter '" + name + "' " +
                                 shape_str(tensor.shape()));
        }
        if (!it->second.all_finite()) {
            throw NumericError("adamw: non-finite gradient for parameter '" + name +
                               "' at step " + std::to_string(steps_ + 1));
        }
    }

    ++steps_;
    const double lr = learning_rate_at(steps_);
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));

    auto& entries = params.entries();
    for (std::size_t p = 0; p < entries.size(); ++p) {
        auto& [name, tensor] = entries[p];
        auto it = grads.find(name);
        if (it == grads.end()) continue;
        const Tensor& g = it->second;
        Slot& slot = slots_[p];
        if (slot.m.size() != tensor.size()) {
            slot.m.assign(tensor.size(), 0.0);
            slot.v.assign(tensor.size(), 0.0);
        }
        for (std::size_t i = 0; i < tensor.size(); ++i) {
            const double gi = g[i];
            slot.m[i] = cfg_.beta1 * slot.m[i] + (1.0 - cfg_.beta1) * gi;
            slot.v[i] = cfg_.beta2 * slot.v[i] + (1.0 - cfg_.beta2) * gi * gi;
            const double mhat = slot.m[i] / bc1;
            const double vhat = slot.v[i] / bc2;
            tensor[i] -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) +
                               cfg_.weight_decay * tensor[i]);
        }
    }
}

} // namespace omake::numerics
