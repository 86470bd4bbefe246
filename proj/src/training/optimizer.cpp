#include <cmath>

#include "moce/errors.hpp"
#include "moce/training.hpp"

namespace moce::training {

Optimizer::Optimizer(OptimizerKind kind, double learning_rate, double decay, double epsilon)
    : kind_(kind), lr_(learning_rate), decay_(decay), eps_(epsilon) {}

void Optimizer::step(const std::vector<Tensor>& params) {
    if (first_.empty()) {
        for (const auto& p : params) {
            first_.emplace_back(kind_ == OptimizerKind::Adam ? p.numel() : 0, 0.0);
            second_.emplace_back(kind_ == OptimizerKind::Sgd ? 0 : p.numel(), 0.0);
        }
    }
    if (params.size() != second_.size()) throw ContractError("optimizer: parameter list changed");
    ++steps_;
    const double beta1 = 0.9;
    const double bias2 = 1.0 - std::pow(decay_, static_cast<double>(steps_));
    const double bias1 = 1.0 - std::pow(beta1, static_cast<double>(steps_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto values = params[i].mutable_values();
        const auto grad = params[i].grad();
        for (std::size_t j = 0; j < values.size(); ++j) {
            const double g = grad[j];
            switch (kind_) {
                case OptimizerKind::Sgd:
                    values[j] -= lr_ * g;
                    break;
                case OptimizerKind::Rms: {
                    double& v = second_[i][j];
                    v = decay_ * v + (1.0 - decay_) * g * g;
                    values[j] -= lr_ * g / (std::sqrt(v / bias2) + eps_);
                    break;
                }
                case OptimizerKind::Adam: {
                    double& m = first_[i][j];
                    double& v = second_[i][j];
                    m = beta1 * m + (1.0 - beta1) * g;
                    v = decay_ * v + (1.0 - decay_) * g * g;
                    values[j] -= lr_ * (m / bias1) / (std::sqrt(v / bias2) + eps_);
                    break;
                }
            }
        }
    }
}

}  // namespace moce::training
