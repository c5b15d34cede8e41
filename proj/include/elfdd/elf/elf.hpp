#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "elfdd/data/augment.hpp"
#include "elfdd/data/dataset.hpp"
#include "elfdd/nn/model.hpp"
#include "elfdd/nn/train.hpp"

namespace elfdd::elf {

enum class Distance { MAE, MSE, Cos, CE };
std::string to_string(Distance d);
Distance parse_distance(const std::string& s);

enum class SpatialAdapt { Off, AvgPoolToMatch };
std::string to_string(SpatialAdapt a);
SpatialAdapt parse_spatial_adapt(const std::string& s);

struct CacheMeta {
  nn::ModelConfig extractor;
  /// Training epoch of the extractor checkpoint.
  int extractor_epoch = 0;
  /// Feature block of the extractor the features were tapped from.
  int block_index = 0;
  /// data::dataset_hash of the synthetic set.
  std::string dataset_hash;
  /// UTC, ISO 8601.
  std::string created;
};

/// Extractor features of every synthetic image, keyed by its row in S.
struct FeatureCache {
  CacheMeta meta;
  std::map<std::int64_t, Tensor> entries;  // each C x H x W

  std::int64_t size() const { return static_cast<std::int64_t>(entries.size()); }
  /// Shape of one entry; throws on an empty cache.
  Shape feature_shape() const;
  /// Stacks the entries of `ids` into len(ids) x C x H x W. Throws ValueError
  /// naming the first missing id.
  Tensor gather(std::span<const std::int64_t> ids) const;
  /// Entry count equals |S|, shapes are uniform and the hash matches S.
  void check_against(const data::SyntheticDataset& syn) const;
};

struct ElfConfig {
  double lambda_front = 1.0;
  double lambda_rear = 1.0;
  /// Off only for ablations: the model then learns from the feature terms alone.
  bool use_task = true;
  Distance distance = Distance::CE;
  /// Split name for the evaluation model; empty selects the family default.
  std::string split;
  /// Extractor checkpoint epoch whose features are used.
  int feature_epoch = 30;
  SpatialAdapt spatial_adapt = SpatialAdapt::Off;
  int epochs = 1000;
  double lr = 0.01;
  std::int64_t batch_size = 256;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  bool decay_at_half = true;
  /// Applied to the task-loss branch only.
  data::AugmentConfig augment;

  void validate(const nn::ModelConfig& eval_model) const;
  nn::SplitPoint split_point(const nn::ModelConfig& eval_model) const;
  nn::TrainOptions train_options(PrngState seed) const;
};

struct ExtractorCheckpoint {
  int epoch = 0;
  nn::ModelState model;
};

struct ExtractorOptions {
  /// Epochs at which to keep a snapshot; training runs to the largest.
  std::vector<int> checkpoint_epochs{30, 50};
  nn::TrainOptions train;
  /// Channel count of the evaluation split the features will supervise.
  std::optional<std::int64_t> target_channels;
};

/// Classification training of a ConvNet on the real set, with snapshots. A
/// checkpoint list of {0} (or empty) returns the initialization only.
std::vector<ExtractorCheckpoint> train_feature_extractor(const nn::ModelConfig& arch, const data::LabeledDataset& real,
                                                         const ExtractorOptions& options);

/// One model file per checkpoint ("extractor_e<epoch>.elft" plus sidecar) and
/// a manifest.json listing them.
void save_extractor_checkpoints(const std::filesystem::path& dir, const std::vector<ExtractorCheckpoint>& ckpts);
/// Loads the checkpoint for `epoch` from a directory written by
/// save_extractor_checkpoints.
ExtractorCheckpoint load_extractor_checkpoint(const std::filesystem::path& dir, int epoch);

/// Eval-mode, unaugmented features of every synthetic image after feature
/// block `block_index` (0 selects the last block).
FeatureCache extract_features(const ExtractorCheckpoint& extractor, const data::SyntheticDataset& syn,
                              int block_index = 0, std::int64_t chunk = 256);

// Cache file, integers little-endian:
//
//   "ELFC"        4 bytes magic
//   version       u16 (currently 1)
//   meta_len      u32, then meta_len bytes of JSON
//   entries       one ELFT checkpoint, tensor names are decimal ids
inline constexpr std::uint16_t kCacheVersion = 1;

void save_cache(const FeatureCache& cache, const std::filesystem::path& path);
/// With `expected_hash`, refuses a cache extracted from a different S.
FeatureCache load_cache(const std::filesystem::path& path, const std::optional<std::string>& expected_hash = {});

/// Mean over rows of the per-sample distance between student and teacher
/// (both N x ...). MAE and MSE average over elements; Cos is 1 - cosine of
/// the flattened sample (1 for a zero vector); CE is the cross-entropy of the
/// student's softmax against the teacher's softmax over the flattened sample.
/// The teacher is a constant.
Var feature_distance(Distance kind, Var student, const Tensor& teacher);
double feature_distance(Distance kind, const Tensor& student, const Tensor& teacher);

/// Brings `teacher` to the spatial size of a student of shape
/// `student_shape` (C x H x W). Channels must match. With AvgPoolToMatch the
/// larger map (either side) is average-pooled to the smaller one; the
/// returned pair is (student pool factor, adapted teacher).
struct Adapted {
  std::int64_t student_pool = 1;
  Tensor teacher;
};
Adapted adapt_teacher(const Shape& student_shape, const Tensor& teacher, SpatialAdapt mode);

/// feature_distance(front(x), cache[ids]) with the front in `mode`.
Var front_loss(Graph& g, const FeatureCache& cache, const nn::Section& front, const nn::Binding& params, Var x,
               std::span<const std::int64_t> ids, Distance kind, SpatialAdapt adapt, nn::Mode mode = nn::Mode::Train);
/// Cross-entropy of rear(cache[ids]) against `labels`. BN layers use batch
/// moments in Train mode but running statistics are not updated.
Var rear_loss(Graph& g, const FeatureCache& cache, const nn::Section& rear, const nn::Binding& params,
              std::span<const std::int64_t> ids, std::span<const int> labels, SpatialAdapt adapt,
              nn::Mode mode = nn::Mode::Train);
/// Cross-entropy of the whole model on the synthetic batch.
Var task_loss(Graph& g, nn::ModelState& model, const nn::Binding& params, Var x, std::span<const int> labels,
              nn::Mode mode = nn::Mode::Train);

/// task + lambda_front * front + lambda_rear * rear. A term with a zero
/// weight is left out of the graph and may be undefined; so may `task`, as
/// long as some term remains.
Var elf_total_loss(Var task, Var front, Var rear, double lambda_front, double lambda_rear);
double elf_total_loss(double task, double front, double rear, double lambda_front, double lambda_rear);

struct StepTrace {
  std::vector<double> task, front, rear, total;
};

struct EvalRun {
  nn::ModelState model;
  StepTrace trace;  // one entry per optimization step; skipped terms record 0
};

/// Trains a fresh `eval_model` on S. Without a cache (or with both lambdas
/// 0) this is the plain task-loss protocol, step for step the same as
/// nn::train_classifier with the same options.
EvalRun train_evaluation_model(const nn::ModelConfig& eval_model, const data::SyntheticDataset& syn,
                               const FeatureCache* cache, const ElfConfig& config, PrngState seed);

}  // namespace elfdd::elf
