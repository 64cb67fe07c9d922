#pragma once

// Adam with bias correction plus the stepwise learning-rate schedule
// (multiply by gamma at each milestone epoch).

#include "csnake/tensor.hpp"

namespace csnake {

template <class T>
struct AdamConfig {
    T lr = T(2.5e-4);
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T eps = T(1e-8);
    T weight_decay = T(0);
};

template <class T>
class Adam {
public:
    explicit Adam(AdamConfig<T> cfg = {}) : cfg_(cfg) {}

    void register_param(const std::string& name, const TensorPtr<T>& p) {
        if (!p || !p->requires_grad)
            throw ContractViolation("adam: parameter '" + name + "' must require gradients");
        names_.push_back(name);
        params_.push_back(p);
        m_.emplace_back(p->size(), T(0));
        v_.emplace_back(p->size(), T(0));
    }

    // One bias-corrected update. Gradients are left untouched; the caller
    // resets them via zero_grad().
    void step() {
        ++step_count_;
        T bc1 = T(1) - std::pow(cfg_.beta1, static_cast<T>(step_count_));
        T bc2 = T(1) - std::pow(cfg_.beta2, static_cast<T>(step_count_));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            Tensor<T>& p = *params_[i];
            if (p.grad.size() != p.data.size())
                throw ContractViolation("adam: parameter '" + names_[i] + "' has no gradient");
            for (std::size_t j = 0; j < p.data.size(); ++j) {
                T g = p.grad[j];
                if (cfg_.weight_decay != T(0)) g += cfg_.weight_decay * p.data[j];
                m_[i][j] = cfg_.beta1 * m_[i][j] + (T(1) - cfg_.beta1) * g;
                v_[i][j] = cfg_.beta2 * v_[i][j] + (T(1) - cfg_.beta2) * g * g;
                T mhat = m_[i][j] / bc1;
                T vhat = v_[i][j] / bc2;
                p.data[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
            }
        }
    }

    void zero_grad() {
        for (auto& p : params_) p->zero_grad();
    }

    long step_count() const { return step_count_; }
    T lr() const { return cfg_.lr; }
    void set_lr(T lr) { cfg_.lr = lr; }
    const AdamConfig<T>& config() const { return cfg_; }
    std::size_t param_count() const { return params_.size(); }
    const std::vector<std::string>& param_names() const { return names_; }

    // moment access for checkpointing
    const std::vector<T>& first_moment(std::size_t i) const { return m_[i]; }
    const std::vector<T>& second_moment(std::size_t i) const { return v_[i]; }
    void restore_state(long step_count, std::vector<std::vector<T>> m, std::vector<std::vector<T>> v) {
        if (m.size() != params_.size() || v.size() != params_.size())
            throw ContractViolation("adam: restored moment count does not match registered parameters");
        for (std::size_t i = 0; i < params_.size(); ++i)
            if (m[i].size() != params_[i]->size() || v[i].size() != params_[i]->size())
                throw ContractViolation("adam: restored moment shape mismatch for '" + names_[i] + "'");
        step_count_ = step_count;
        m_ = std::move(m);
        v_ = std::move(v);
    }

private:
    AdamConfig<T> cfg_;
    long step_count_ = 0;
    std::vector<std::string> names_;
    std::vector<TensorPtr<T>> params_;
    std::vector<std::vector<T>> m_, v_;
};

// Learning rate after `epoch` (1-based) under the milestone schedule.
template <class T>
T scheduled_lr(T base_lr, T gamma, const std::vector<int>& milestones, int epoch) {
    T lr = base_lr;
    for (int m : milestones)
        if (epoch >= m) lr *= gamma;
    return lr;
}

}  // namespace csnake
