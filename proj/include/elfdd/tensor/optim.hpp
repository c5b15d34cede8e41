#pragma once

#include <map>
#include <string>

#include "elfdd/tensor/tensor.hpp"

namespace elfdd {

using TensorMap = std::map<std::string, Tensor>;

/// Heavy-ball SGD: v <- momentum * v + g, p <- p - lr * v.
///
/// Only names present in `grads` are updated; each must exist in `params`.
/// Missing velocity entries start at zero.
void sgd_momentum_step(TensorMap& params, const TensorMap& grads, TensorMap& velocity, double lr,
                       double momentum);

struct SgdMomentum {
  double lr = 0.01;
  double momentum = 0.9;
  TensorMap velocity;

  void step(TensorMap& params, const TensorMap& grads) {
    sgd_momentum_step(params, grads, velocity, lr, momentum);
  }
};

}  // namespace elfdd
