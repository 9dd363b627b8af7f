#include "splice/nn.hpp"

namespace splice::nn {

Adam::Adam(std::vector<Param*> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (auto* p : params_) {
        m_.emplace_back(p->value.shape);
        v_.emplace_back(p->value.shape);
    }
}

void Adam::zero_grad() {
    for (auto* p : params_) p->grad.zero();
}

void Adam::step() {
    ++t_;
    float bias1 = 1.0f - std::pow(cfg_.beta1, static_cast<float>(t_));
    float bias2 = 1.0f - std::pow(cfg_.beta2, static_cast<float>(t_));
    const auto& k = kernels::ops();
    for (size_t i = 0; i < params_.size(); ++i) {
        auto* p = params_[i];
        k.adam_update(p->value.ptr(), p->grad.ptr(), m_[i].ptr(), v_[i].ptr(),
                      p->value.numel(), cfg_.lr, cfg_.beta1, cfg_.beta2, cfg_.eps,
                      bias1, bias2);
    }
}

double StepLrSchedule::lr_at(int epoch) const {
    if (epoch < 0) throw RangeError("lr_at: epoch must be >= 0");
    if (step_size < 1) throw ConfigError("lr_at: step size must be >= 1");
    return initial * std::pow(factor, epoch / step_size);
}

} // namespace splice::nn
