#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "elfdd/data/dataset.hpp"
#include "elfdd/distill/distill.hpp"
#include "elfdd/elf/elf.hpp"
#include "elfdd/nn/model.hpp"

namespace elfdd::exp {

/// Fraction of rows whose argmax is the label; ties go to the lowest class
/// index. Throws ValueError on an empty set.
double top1_accuracy(const Tensor& logits, std::span<const int> labels);
/// top1_accuracy of the Eval-mode logits.
double evaluate_accuracy(nn::ModelState& model, const data::LabeledDataset& test);

struct DatasetSpec {
  enum class Kind { Toy, Cifar10 } kind = Kind::Toy;
  data::ToyShapesConfig toy;
  std::int64_t test_per_class = 100;
  /// CIFAR-10 binary batch files.
  std::vector<std::filesystem::path> cifar_train;
  std::filesystem::path cifar_test;

  std::pair<data::LabeledDataset, data::LabeledDataset> load() const;
  /// (channels, height, width) and class count, without loading files.
  std::array<std::int64_t, 3> image_shape() const;
  int class_count() const;
};

struct DistillSpec {
  /// An existing synthetic set; when empty S is distilled with `config`.
  std::filesystem::path path;
  distill::DistillConfig config;
};

/// The ConvNet trained on the real set whose features supervise ELF. The
/// epoch count and seed in `train` are not used: training runs to the last
/// checkpoint epoch and the seed derives from the experiment seed.
struct ExtractorSpec {
  nn::ModelConfig model;
  nn::TrainOptions train;
  std::vector<int> checkpoint_epochs{30, 50};
};

enum class FeatureSource { Extractor, EvalArch };
std::string to_string(FeatureSource s);
FeatureSource parse_feature_source(const std::string& s);

struct GridEntry {
  std::string id;
  nn::ModelConfig model;
  bool use_elf = false;
  /// Training protocol for both variants; the ELF fields apply when use_elf.
  elf::ElfConfig elf;
  FeatureSource source = FeatureSource::Extractor;

  /// Hash of everything that determines this entry's results.
  std::string hash() const;
};

struct ExperimentConfig {
  std::string name = "experiment";
  DatasetSpec data;
  DistillSpec distill;
  ExtractorSpec extractor;
  std::vector<GridEntry> grid;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "runs/experiment";
  /// Where records.json, records.csv and manifest.json go, relative to
  /// out_dir. Cells, S and caches always live in out_dir and are shared.
  std::filesystem::path report_subdir;
  int workers = 1;

  /// Throws ConfigError on duplicate ids, an empty seed list or invalid entries.
  void validate() const;
};

struct FinalLosses {
  double task = 0, front = 0, rear = 0, total = 0;
  bool operator==(const FinalLosses&) const = default;
};

struct MetricsRecord {
  std::string run_id;  // grid entry id
  std::string config_hash;
  std::string eval_model;
  std::string distill_model;
  std::string method;
  bool elf = false;
  std::vector<std::uint64_t> seeds;
  std::vector<double> accuracies;
  double mean = 0;
  /// Population standard deviation over seeds.
  double std = 0;
  double wall_seconds = 0;
  /// Averaged over seeds.
  FinalLosses final_losses;
  /// "ok" or "failed".
  std::string status = "ok";
  std::string error;
  /// Per-seed loss trace files, relative to out_dir.
  std::vector<std::string> trace_files;

  bool operator==(const MetricsRecord&) const = default;
};

/// Mean and population standard deviation.
std::pair<double, double> mean_std(const std::vector<double>& values);

struct ExperimentResult {
  std::vector<MetricsRecord> records;
  int cells_trained = 0;
  int cells_reused = 0;
  int failed_entries = 0;
};

/// Distills (or loads) S once, builds the feature caches the grid needs,
/// then trains every entry for every seed. Finished (entry, seed) cells are
/// kept on disk and skipped on a rerun. A failing entry is recorded and the
/// others continue.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Only the distillation stage; returns the synthetic set (reused when
/// already present in the output directory).
data::SyntheticDataset prepare_synthetic(const ExperimentConfig& config, const data::LabeledDataset& train);

/// The cache file an entry reads, building it (and the extractor) when missing.
std::filesystem::path prepare_cache(const ExperimentConfig& config, const GridEntry& entry,
                                    const data::LabeledDataset& train, const data::SyntheticDataset& syn);

/// Trains and tests one (entry, seed) cell. `cache` may be null for baselines.
struct CellResult {
  double accuracy = 0;
  FinalLosses final_losses;
  double seconds = 0;
  elf::StepTrace trace;
};
CellResult run_cell(const GridEntry& entry, std::uint64_t seed, std::uint64_t experiment_seed,
                    const data::SyntheticDataset& syn, const elf::FeatureCache* cache,
                    const data::LabeledDataset& test);

/// Records as written by run_experiment ("records.json").
void save_records(const std::filesystem::path& path, const std::vector<MetricsRecord>& records);
std::vector<MetricsRecord> load_records(const std::filesystem::path& path);

/// Short version string of this build.
std::string version_string();

}  // namespace elfdd::exp
