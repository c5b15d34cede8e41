#include <string>

#include "doctest.h"
#include "support/op_cases.hpp"

using namespace elfdd;
using elfdd::testing::gradcheck;

namespace {

constexpr double kTol = 1e-3;
constexpr int kShapes = 20;

}  // namespace

TEST_CASE("every op agrees with central differences on random shapes") {
  for (const auto& op : elfdd::testing::op_cases()) {
    Rng root(std::hash<std::string>{}(op.name));
    for (int i = 0; i < kShapes; ++i) {
      CAPTURE(op.name);
      CAPTURE(i);
      Rng rng = root.split(static_cast<std::uint64_t>(i));
      const auto trial = op.make(rng);
      CHECK(gradcheck(trial.build, trial.inputs) <= kTol);
    }
  }
}
