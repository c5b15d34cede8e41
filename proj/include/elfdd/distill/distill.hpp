#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "elfdd/data/augment.hpp"
#include "elfdd/data/dataset.hpp"
#include "elfdd/nn/model.hpp"
#include "elfdd/tensor/optim.hpp"

namespace elfdd::distill {

enum class Method { DM, GradMatch };
std::string to_string(Method m);
Method parse_method(const std::string& s);

struct DistillConfig {
  Method method = Method::DM;
  nn::ModelConfig model;
  int ipc = 10;
  data::InitMode init = data::InitMode::RealSample;
  int iterations = 500;
  double lr_img = 1.0;
  double img_momentum = 0.5;
  /// Real images drawn per class per iteration.
  std::int64_t real_per_class = 64;
  /// DM: freshly initialized models averaged per iteration.
  int models_per_iteration = 1;
  /// GradMatch: class sweeps per model initialization, and the model steps
  /// on S taken after each sweep.
  int sweeps_per_model = 10;
  int inner_steps = 10;
  double inner_lr = 0.01;
  /// GradMatch: parameter perturbation of the finite-difference mixed
  /// derivative, relative to the parameter norm.
  double fd_scale = 1e-2;
  data::AugmentConfig augment;
  std::uint64_t seed = 0;

  void validate() const;
  /// Stable FNV-1a hash of every field.
  std::string hash() const;
};

nlohmann::json config_to_json(const DistillConfig& c);

/// Sum over classes of the squared L2 distance between the mean last-block
/// features of the real and synthetic samples of that class. `syn` may be a
/// gradient leaf; `real` should be constants.
Var dm_loss(Graph& g, nn::ModelState& model, const nn::Binding& params, const std::vector<Var>& real_per_class,
            const std::vector<Var>& syn_per_class);

/// Sum over parameter tensors of 1 - cos(vec(a), vec(b)); a tensor that is
/// all zero on either side contributes exactly 1.
double layerwise_cosine_distance(const TensorMap& a, const TensorMap& b);
/// Gradient of layerwise_cosine_distance with respect to `b` (zero for the
/// degenerate layers).
TensorMap layerwise_cosine_distance_grad(const TensorMap& a, const TensorMap& b);

/// Cross-entropy parameter gradients of `model` on a batch, Train mode.
/// Conv biases are left out (each feeds a normalization, so their gradient
/// is identically zero). Running statistics are left untouched.
TensorMap param_gradients(nn::ModelState& model, const Tensor& images, std::span<const int> labels);

struct GradMatchResult {
  double loss = 0.0;
  Tensor grad_syn;  // d loss / d syn pixels
};

/// layerwise_cosine_distance(grad on real batch, grad on syn batch). The
/// pixel gradient goes through the parameter gradient of the synthetic batch;
/// its mixed second derivative is taken by central differences in the
/// direction of d loss / d grad_syn.
GradMatchResult grad_match_loss(nn::ModelState& model, const Tensor& real, std::span<const int> real_labels,
                                const Tensor& syn, std::span<const int> syn_labels, double fd_scale = 1e-2);

struct TraceEntry {
  int iteration = 0;
  double loss = 0.0;
  double seconds = 0.0;
};

/// Augmentation applied to the real and synthetic sides of one class in one step.
struct SiameseRecord {
  int iteration = 0;
  int cls = 0;
  data::AugmentLog real;
  data::AugmentLog syn;
};

struct DistillResult {
  data::SyntheticDataset syn;
  std::vector<TraceEntry> trace;
  std::vector<SiameseRecord> augment_log;
};

DistillResult distill_dm(const data::LabeledDataset& real, const DistillConfig& config);
DistillResult distill_gm(const data::LabeledDataset& real, const DistillConfig& config);
DistillResult run_distillation(const data::LabeledDataset& real, const DistillConfig& config);

using data::dataset_hash;

/// Writes synthetic.elft, synthetic.png, trace.json and manifest.json into `dir`.
void write_outputs(const std::filesystem::path& dir, const DistillResult& result, const DistillConfig& config,
                   const std::string& real_hash);
/// Reads a synthetic set written by write_outputs (or any file with
/// "images"/"labels"/"ipc"/"class_count" tensors).
data::SyntheticDataset load_synthetic(const std::filesystem::path& path);
void save_synthetic(const std::filesystem::path& path, const data::SyntheticDataset& syn);

}  // namespace elfdd::distill
