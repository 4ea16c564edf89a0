//
// Copyright 2026 The invrat Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef INVRAT_OPTIM_HPP_
#define INVRAT_OPTIM_HPP_

#include <cmath>
#include <vector>

#include "invrat/autodiff.hpp"
#include "invrat/error.hpp"

namespace invrat {

struct AdamWOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
};

inline double global_grad_norm(const std::vector<Param*>& params) {
  double sq = 0.0;
  for (const Param* p : params) sq += p->grad.squaredNorm();
  return std::sqrt(sq);
}

// Rescales gradients so their joint L2 norm is at most max_norm. Returns the
// norm before clipping.
inline double clip_grad_norm(const std::vector<Param*>& params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (!std::isfinite(norm)) {
    throw Error(ErrorKind::kNonFinite, "gradient norm is not finite");
  }
  const double coef = max_norm / (norm + 1e-6);
  if (coef < 1.0) {
    for (Param* p : params) p->grad *= coef;
  }
  return norm;
}

// Adam with decoupled weight decay. Moment buffers follow the order of the
// parameter list given at construction.
class AdamW {
 public:
  AdamW() = default;
  AdamW(const std::vector<Param*>& params, const AdamWOptions& options)
      : options_(options) {
    for (const Param* p : params) {
      m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }

  void step(const std::vector<Param*>& params) {
    if (params.size() != m_.size()) {
      throw Error(ErrorKind::kInvalidArgument, "optimizer/parameter count mismatch");
    }
    ++steps_;
    const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(steps_));
    const double lr = options_.learning_rate;
    for (std::size_t i = 0; i < params.size(); ++i) {
      Param& p = *params[i];
      if (options_.weight_decay != 0.0) {
        p.value *= 1.0 - lr * options_.weight_decay;
      }
      m_[i] = options_.beta1 * m_[i] + (1.0 - options_.beta1) * p.grad;
      v_[i] = options_.beta2 * v_[i] +
              (1.0 - options_.beta2) * p.grad.cwiseProduct(p.grad);
      p.value.array() -= lr * (m_[i].array() / bc1) /
                         ((v_[i].array() / bc2).sqrt() + options_.epsilon);
    }
  }

  long long steps() const { return steps_; }

 private:
  AdamWOptions options_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  long long steps_ = 0;
};

}  // namespace invrat

#endif  // INVRAT_OPTIM_HPP_
