#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "elfdd/tensor/graph.hpp"
#include "elfdd/tensor/optim.hpp"
#include "elfdd/tensor/prng.hpp"

namespace elfdd::nn {

enum class Family { ConvNet, MiniResNet, MiniVGG };
enum class Norm { InstanceNorm, BatchNorm };
enum class Mode { Train, Eval };

std::string to_string(Family f);
std::string to_string(Norm n);
Family parse_family(const std::string& s);
Norm parse_norm(const std::string& s);

struct ModelConfig {
  Family family = Family::ConvNet;
  /// ConvNet: number of conv blocks (3 or 4). MiniResNet: 18. MiniVGG: 11.
  int depth = 3;
  int width = 128;
  Norm norm = Norm::InstanceNorm;
  int num_classes = 10;
  std::array<std::int64_t, 3> input_shape{3, 32, 32};
  DType dtype = DType::F32;
  /// Per-channel input standardization applied before the first block.
  std::vector<double> input_mean{0.5, 0.5, 0.5};
  std::vector<double> input_std{0.25, 0.25, 0.25};

  /// Throws ConfigError on unsupported family/depth or nonpositive sizes.
  void validate() const;
  /// Short human-readable tag, e.g. "ConvNet-3-w128-IN".
  std::string name() const;
};

struct RunningStats {
  Tensor mean;  // {C}
  Tensor var;   // {C}
};

struct ModelState {
  ModelConfig config;
  TensorMap params;
  /// Keyed by norm layer name; empty unless config.norm == BatchNorm.
  std::map<std::string, RunningStats> bn_stats;
  double bn_momentum = 0.1;
  double eps = 1e-5;
  Mode mode = Mode::Eval;
};

/// Shapes of every parameter, in a fixed order.
std::vector<std::pair<std::string, Shape>> param_shapes(const ModelConfig& config);
std::int64_t param_count(const ModelConfig& config);

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for conv/linear weights and
/// biases, gamma = 1, beta = 0, running mean 0 / var 1. Each tensor draws from
/// its own stream keyed by name, so the result does not depend on order.
ModelState build_model(const ModelConfig& config, PrngState seed);

/// Number of feature blocks; the classifier head is block number
/// num_blocks(config) + 1.
int num_feature_blocks(const ModelConfig& config);
/// Shape (C, H, W) after feature block `block_index` (1-based).
std::array<std::int64_t, 3> block_output_shape(const ModelConfig& config, int block_index);

/// Boundary after which the rear section begins: the front holds feature
/// blocks 1..block_index, the rear holds the remaining blocks and the head.
struct SplitPoint {
  int block_index = 0;
};

/// Valid indices are 1..num_feature_blocks(config).
void validate_split(const ModelConfig& config, SplitPoint sp);
/// Resolves a named boundary ("conv5_2-analog", "layer5", "block3", or a
/// per-layer name such as "conv4_2b"). Naming a layer inside a residual block
/// throws ConfigError.
SplitPoint resolve_split(const ModelConfig& config, const std::string& name);
/// The family's default split ("conv5_2-analog" for MiniResNet, "layer5" for
/// MiniVGG, the last block but one for ConvNet).
SplitPoint default_split(const ModelConfig& config);

/// Parameter name -> graph variable.
class Binding {
 public:
  Var operator()(const std::string& name) const;
  void set(const std::string& name, Var v) { vars_[name] = v; }
  const std::map<std::string, Var>& vars() const { return vars_; }

 private:
  std::map<std::string, Var> vars_;
};

/// Places every parameter in `g`, as trainable leaves named prefix + name or as
/// constants.
Binding bind(Graph& g, const ModelState& model, bool trainable, const std::string& prefix = {});

/// Runs blocks [begin, end) where 0 means "before block 1" and
/// num_feature_blocks + 1 means "after the head". Input standardization is
/// applied when begin == 0. In Train mode BN layers normalize with batch
/// moments and update model.bn_stats.
Var run_blocks(Graph& g, ModelState& model, const Binding& params, Var x, Mode mode, int begin,
               int end);
Var forward(Graph& g, ModelState& model, const Binding& params, Var x, Mode mode);

/// Convenience forward without gradient tracking. Returns N x num_classes.
Tensor forward(ModelState& model, const Tensor& batch, Mode mode);
/// Post-block activation of feature block `block_index`.
Tensor feature_tap(ModelState& model, const Tensor& batch, int block_index, Mode mode = Mode::Eval);

/// A contiguous range of blocks over a parent model. Sections alias the
/// parent's parameters and running stats.
class Section {
 public:
  Section(ModelState& model, int begin, int end) : model_(&model), begin_(begin), end_(end) {}

  Var run(Graph& g, const Binding& params, Var x, Mode mode) const;
  Tensor run(const Tensor& x, Mode mode) const;
  ModelState& model() const { return *model_; }
  int begin() const { return begin_; }
  int end() const { return end_; }
  /// Parameter names used by this section.
  std::vector<std::string> param_names() const;

 private:
  ModelState* model_;
  int begin_, end_;
};

std::pair<Section, Section> split_model(ModelState& model, SplitPoint sp);

/// ELFT tensors (params plus "running/<layer>.mean|var") and a JSON sidecar at
/// path + ".json" holding the config and BN settings.
void save_model(const std::filesystem::path& path, const ModelState& model);
ModelState load_model(const std::filesystem::path& path);

}  // namespace elfdd::nn
