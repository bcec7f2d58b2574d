#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "thermvis/error.hpp"
#include "thermvis/layers.hpp"

namespace thermvis {

/// Adam over a fixed list of parameters. Moments are keyed by position in
/// the list, which follows the networks' stable naming order.
template <typename T>
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<std::pair<std::string, Param<T>*>> params, double beta1, double beta2,
       double eps = 1e-8)
      : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& [name, p] : params_) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }

  void step(double lr) {
    ++steps_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      Param<T>& p = *params_[k].second;
      Tensor<T>& m = m_[k];
      Tensor<T>& v = v_[k];
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double g = p.grad[i];
        const double mi = beta1_ * m[i] + (1.0 - beta1_) * g;
        const double vi = beta2_ * v[i] + (1.0 - beta2_) * g * g;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        const double update = lr * (mi / c1) / (std::sqrt(vi / c2) + eps_);
        p.value[i] = static_cast<T>(p.value[i] - update);
      }
    }
  }

  void zero_grad() {
    for (auto& [name, p] : params_) p->grad.zero();
  }

  long steps() const { return steps_; }
  void set_steps(long s) { steps_ = s; }

  /// Named moment arrays ("<prefix>.m.<param>", "<prefix>.v.<param>").
  std::vector<std::pair<std::string, Tensor<T>*>> moments(const std::string& prefix) {
    std::vector<std::pair<std::string, Tensor<T>*>> out;
    for (std::size_t k = 0; k < params_.size(); ++k) {
      out.emplace_back(prefix + ".m." + params_[k].first, &m_[k]);
      out.emplace_back(prefix + ".v." + params_[k].first, &v_[k]);
    }
    return out;
  }

  const std::vector<std::pair<std::string, Param<T>*>>& params() const { return params_; }

 private:
  std::vector<std::pair<std::string, Param<T>*>> params_;
  std::vector<Tensor<T>> m_;
  std::vector<Tensor<T>> v_;
  double beta1_ = 0.5;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long steps_ = 0;
};

}  // namespace thermvis
