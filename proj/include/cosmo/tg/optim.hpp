#pragma once

#include "cosmo/tg/tensor.hpp"

#include <cmath>
#include <unordered_map>

namespace tg {

// Adam with explicit gradient zeroing between steps.
class Adam {
public:
    Adam(Scalar lr = Scalar(1e-4), Scalar beta1 = Scalar(0.5), Scalar beta2 = Scalar(0.999),
         Scalar eps = Scalar(1e-8))
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void add_params(const std::vector<Tensor>& params) {
        for (const auto& p : params) params_.push_back(p);
    }

    void zero_grad() {
        for (auto& p : params_) p.zero_grad();
    }

    void step() {
        ++t_;
        Scalar bc1 = Scalar(1) - std::pow(beta1_, static_cast<Scalar>(t_));
        Scalar bc2 = Scalar(1) - std::pow(beta2_, static_cast<Scalar>(t_));
        for (auto& p : params_) {
            Node* key = p.node().get();
            auto& st = state_[key];
            auto& g = p.grad();
            auto& d = p.data();
            if (st.m.size() != d.size()) {
                st.m.assign(d.size(), Scalar(0));
                st.v.assign(d.size(), Scalar(0));
            }
            for (size_t i = 0; i < d.size(); ++i) {
                st.m[i] = beta1_ * st.m[i] + (Scalar(1) - beta1_) * g[i];
                st.v[i] = beta2_ * st.v[i] + (Scalar(1) - beta2_) * g[i] * g[i];
                Scalar mh = st.m[i] / bc1;
                Scalar vh = st.v[i] / bc2;
                d[i] -= lr_ * mh / (std::sqrt(vh) + eps_);
            }
        }
    }

    Scalar lr() const { return lr_; }
    void set_lr(Scalar lr) { lr_ = lr; }

private:
    struct State {
        std::vector<Scalar> m, v;
    };
    Scalar lr_, beta1_, beta2_, eps_;
    int64_t t_ = 0;
    std::vector<Tensor> params_;
    std::unordered_map<Node*, State> state_;
};

}  // namespace tg
