#include "elfdd/tensor/optim.hpp"

namespace elfdd {

void sgd_momentum_step(TensorMap& params, const TensorMap& grads, TensorMap& velocity, double lr,
                       double momentum) {
  for (const auto& [name, g] : grads) {
    auto it = params.find(name);
    if (it == params.end()) throw ShapeError("sgd: gradient for unknown parameter '" + name + "'");
    Tensor& p = it->second;
    require_same_shape(p, g, "sgd (param vs grad)");
    auto vit = velocity.find(name);
    if (vit == velocity.end()) {
      vit = velocity.emplace(name, Tensor::zeros(p.shape(), p.dtype())).first;
    }
    require_same_shape(p, vit->second, "sgd (param vs velocity)");
    dispatch(p.dtype(), [&]<class T>() {
      auto ps = p.data<T>();
      auto gs = g.data<T>();
      auto vs = vit->second.data<T>();
      std::vector<T> np(ps.size()), nv(ps.size());
      const T m = static_cast<T>(momentum);
      const T step = static_cast<T>(lr);
      for (std::size_t i = 0; i < ps.size(); ++i) {
        nv[i] = m * vs[i] + gs[i];
        np[i] = ps[i] - step * nv[i];
      }
      vit->second = Tensor::from(p.shape(), std::move(nv));
      p = Tensor::from(p.shape(), std::move(np));
    });
  }
}

}  // namespace elfdd
