#pragma once

// One random trial per call for every differentiable operation: a scalar
// loss over the op and its F64 inputs. Shared by the unit gradient checks and
// the acceptance run.

#include <functional>
#include <string>
#include <vector>

#include "elfdd/elf/elf.hpp"
#include "support/gradcheck.hpp"

namespace elfdd::testing {

struct OpTrial {
  LossBuilder build;
  std::vector<Tensor> inputs;
};

struct OpCase {
  std::string name;
  std::function<OpTrial(Rng&)> make;
};

namespace detail {

inline Tensor rn(const Shape& s, Rng& rng, double sd = 1.0) { return random_normal(s, rng, sd, DType::F64); }
inline std::int64_t pick(Rng& rng, std::int64_t lo, std::int64_t hi) {
  return lo + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

}  // namespace detail

inline std::vector<OpCase> op_cases() {
  using detail::pick;
  using detail::rn;
  std::vector<OpCase> cases = {
      {"add/sub/mul",
       [](Rng& rng) {
         Shape s{pick(rng, 1, 4), pick(rng, 1, 5)};
         return OpTrial{[](Graph&, const std::vector<Var>& v) {
                          return project(ops::mul(ops::add(v[0], v[1]), ops::sub(v[0], ops::scale(v[1], 0.5))));
                        },
                        {rn(s, rng), rn(s, rng)}};
       }},
      {"square/abs/relu",
       [](Rng& rng) {
         Shape s{pick(rng, 1, 3), pick(rng, 1, 3), pick(rng, 1, 4)};
         return OpTrial{[](Graph&, const std::vector<Var>& v) {
                          return ops::add(project(ops::square(v[0])),
                                          ops::add(project(ops::abs(v[0]), 3), project(ops::relu(v[0]), 4)));
                        },
                        {rn(s, rng)}};
       }},
      {"sum/mean/mean_rows",
       [](Rng& rng) {
         Shape s{pick(rng, 1, 6), pick(rng, 1, 6)};
         return OpTrial{[](Graph&, const std::vector<Var>& v) {
                          return ops::add(ops::mul(ops::sum(v[0]), ops::mean(v[0])), project(ops::mean_rows(v[0])));
                        },
                        {rn(s, rng)}};
       }},
      {"reshape/flatten",
       [](Rng& rng) {
         Shape s{pick(rng, 1, 3), pick(rng, 1, 3), pick(rng, 1, 3), pick(rng, 1, 3)};
         return OpTrial{[s](Graph&, const std::vector<Var>& v) {
                          auto f = ops::flatten(v[0]);
                          auto r = ops::reshape(v[0], {shape_numel(s)});
                          return ops::add(project(f), project(r, 7));
                        },
                        {rn(s, rng)}};
       }},
      {"slice/concat",
       [](Rng& rng) {
         const auto n = pick(rng, 2, 6), d = pick(rng, 1, 4);
         const auto cut = pick(rng, 1, n - 1);
         return OpTrial{[n, cut](Graph&, const std::vector<Var>& v) {
                          auto a = ops::slice_rows(v[0], 0, cut);
                          auto b = ops::slice_rows(v[0], cut, n);
                          return project(ops::concat_rows({b, v[1], a}));
                        },
                        {rn({n, d}, rng), rn({pick(rng, 1, 3), d}, rng)}};
       }},
      {"conv2d/bias_add",
       [](Rng& rng) {
         const auto k = pick(rng, 1, 3), h = pick(rng, k, 7), stride = pick(rng, 1, 2), pad = pick(rng, 0, 1);
         const auto n = pick(rng, 1, 2), c = pick(rng, 1, 3), o = pick(rng, 1, 3);
         return OpTrial{[stride, pad](Graph&, const std::vector<Var>& v) {
                          return project(ops::bias_add(ops::conv2d(v[0], v[1], stride, pad), v[2]));
                        },
                        {rn({n, c, h, h + 1}, rng), rn({o, c, k, k}, rng), rn({o}, rng)}};
       }},
      {"avg_pool2d",
       [](Rng& rng) {
         const auto k = pick(rng, 1, 3), h = pick(rng, k, 8), stride = pick(rng, 1, 2);
         return OpTrial{
             [k, stride](Graph&, const std::vector<Var>& v) { return project(ops::avg_pool2d(v[0], k, stride)); },
             {rn({pick(rng, 1, 2), pick(rng, 1, 3), h, h}, rng)}};
       }},
      {"max_pool2d",
       [](Rng& rng) {
         const auto k = pick(rng, 1, 3), h = pick(rng, k, 8), stride = pick(rng, 1, 2);
         return OpTrial{
             [k, stride](Graph&, const std::vector<Var>& v) { return project(ops::max_pool2d(v[0], k, stride)); },
             {rn({pick(rng, 1, 2), pick(rng, 1, 3), h, h}, rng)}};
       }},
      {"global_avg_pool",
       [](Rng& rng) {
         return OpTrial{[](Graph&, const std::vector<Var>& v) { return project(ops::global_avg_pool(v[0])); },
                        {rn({pick(rng, 1, 3), pick(rng, 1, 4), pick(rng, 1, 5), pick(rng, 1, 5)}, rng)}};
       }},
      {"linear",
       [](Rng& rng) {
         const auto n = pick(rng, 1, 5), d = pick(rng, 1, 6), k = pick(rng, 1, 4);
         return OpTrial{[](Graph&, const std::vector<Var>& v) { return project(ops::linear(v[0], v[1], v[2])); },
                        {rn({n, d}, rng), rn({d, k}, rng), rn({k}, rng)}};
       }},
      {"instance_norm",
       [](Rng& rng) {
         const auto c = pick(rng, 1, 3);
         Shape s{pick(rng, 1, 3), c, pick(rng, 2, 5), pick(rng, 2, 5)};
         return OpTrial{[](Graph&, const std::vector<Var>& v) {
                          return project(ops::instance_norm(v[0], v[1], v[2], 1e-5));
                        },
                        {rn(s, rng, 2.0), rn({c}, rng), rn({c}, rng)}};
       }},
      {"batch_norm_train",
       [](Rng& rng) {
         const auto c = pick(rng, 1, 3);
         Shape s{pick(rng, 2, 4), c, pick(rng, 1, 4), pick(rng, 1, 4)};
         return OpTrial{[](Graph&, const std::vector<Var>& v) {
                          return project(ops::batch_norm_train(v[0], v[1], v[2], 1e-5, nullptr));
                        },
                        {rn(s, rng, 2.0), rn({c}, rng), rn({c}, rng)}};
       }},
      {"batch_norm_eval",
       [](Rng& rng) {
         const auto c = pick(rng, 1, 3);
         Shape s{pick(rng, 1, 3), c, pick(rng, 1, 4), pick(rng, 1, 4)};
         Tensor mean = rn({c}, rng);
         Tensor var = random_uniform({c}, rng, 0.5, 2.0, DType::F64);
         return OpTrial{[mean, var](Graph&, const std::vector<Var>& v) {
                          return project(ops::batch_norm_eval(v[0], v[1], v[2], mean, var, 1e-5));
                        },
                        {rn(s, rng), rn({c}, rng), rn({c}, rng)}};
       }},
      {"softmax_cross_entropy",
       [](Rng& rng) {
         const auto n = pick(rng, 1, 5), k = pick(rng, 2, 6);
         std::vector<int> labels(static_cast<std::size_t>(n));
         for (auto& l : labels) l = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
         return OpTrial{[labels](Graph&, const std::vector<Var>& v) {
                          return ops::softmax_cross_entropy(v[0], labels);
                        },
                        {rn({n, k}, rng, 2.0)}};
       }},
      {"soft_cross_entropy",
       [](Rng& rng) {
         const auto n = pick(rng, 1, 5), k = pick(rng, 2, 6);
         Tensor target = ops::softmax_rows(rn({n, k}, rng));
         return OpTrial{
             [target](Graph&, const std::vector<Var>& v) { return ops::soft_cross_entropy(v[0], target); },
             {rn({n, k}, rng, 2.0)}};
       }},
      {"cosine_distance_rows",
       [](Rng& rng) {
         Shape s{pick(rng, 1, 5), pick(rng, 2, 7)};
         return OpTrial{
             [](Graph&, const std::vector<Var>& v) { return ops::cosine_distance_rows(v[0], v[1]); },
             {rn(s, rng), rn(s, rng)}};
       }},
      {"spatial_resample",
       [](Rng& rng) {
         const auto h = pick(rng, 2, 6), w = pick(rng, 2, 6);
         ops::SpatialMap map;
         map.in_h = h;
         map.in_w = w;
         map.out_h = pick(rng, 1, 6);
         map.out_w = pick(rng, 1, 6);
         const auto q = map.out_h * map.out_w * ops::SpatialMap::kTaps;
         for (std::int64_t i = 0; i < q; ++i) {
           const bool used = rng.uniform() < 0.8;
           map.sources.push_back(used ? static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(h * w))) : -1);
           map.weights.push_back(used ? rng.uniform() : 0.0);
         }
         return OpTrial{[map](Graph&, const std::vector<Var>& v) { return project(ops::spatial_resample(v[0], map)); },
                        {rn({pick(rng, 1, 2), pick(rng, 1, 3), h, w}, rng)}};
       }},
      {"conv-in-relu-pool-linear",
       [](Rng& rng) {
         const auto c = pick(rng, 1, 3), o = pick(rng, 2, 4);
         std::vector<int> labels{0, 2};
         return OpTrial{[labels](Graph&, const std::vector<Var>& v) {
                          auto h = ops::conv2d(v[0], v[1], 1, 1);
                          h = ops::relu(ops::instance_norm(h, v[2], v[3], 1e-5));
                          h = ops::flatten(ops::avg_pool2d(h, 2, 2));
                          return ops::softmax_cross_entropy(ops::linear(h, v[4], v[5]), labels);
                        },
                        {rn({2, c, 4, 4}, rng), rn({o, c, 3, 3}, rng), rn({o}, rng), rn({o}, rng),
                         rn({o * 4, 3}, rng), rn({3}, rng)}};
       }},
  };
  for (auto kind : {elf::Distance::MAE, elf::Distance::MSE, elf::Distance::Cos, elf::Distance::CE}) {
    cases.push_back({"feature_distance/" + elf::to_string(kind), [kind](Rng& rng) {
                       Shape s{pick(rng, 1, 4), pick(rng, 1, 3), pick(rng, 1, 3), pick(rng, 1, 3)};
                       Tensor teacher = rn(s, rng);
                       return OpTrial{[kind, teacher](Graph&, const std::vector<Var>& v) {
                                        return elf::feature_distance(kind, v[0], teacher);
                                      },
                                      {rn(s, rng)}};
                     }});
  }
  return cases;
}

}  // namespace elfdd::testing
