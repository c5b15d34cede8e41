#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "elfdd/exp/experiment.hpp"

namespace elfdd::exp {

// Experiment files are INI. Sections and keys:
//
//   [experiment]  name, seed, seeds (comma list), out_dir, workers
//   [data]        kind (toy | cifar10); toy: classes, resolution, channels,
//                 samples_per_class, noise, seed, test_per_class;
//                 cifar10: train (comma list of files), test
//   [distill]     path (an existing S), or method (dm | gm), family, depth,
//                 width, norm, ipc, init (real | noise), iterations, lr_img,
//                 img_momentum, real_per_class, models_per_iteration,
//                 sweeps_per_model, inner_steps, inner_lr, fd_scale,
//                 augment (comma list of flip, crop, cutout, scale),
//                 augment_mode (single | all), seed
//   [extractor]   depth, width, norm, checkpoint_epochs (comma list),
//                 batch_size, lr, momentum, weight_decay, decay_at_half
//   [train]       defaults for every entry: epochs, lr, batch_size, momentum,
//                 weight_decay, decay_at_half, augment, augment_mode,
//                 lambda_front, lambda_rear, use_task, distance, split,
//                 feature_epoch, spatial_adapt, source (extractor | eval-arch)
//   [entry.<id>]  family, depth, width, norm, elf (true | false | both),
//                 and any [train] key. "both" makes two entries,
//                 "<id>-base" and "<id>-elf".
//
// Relative paths are taken from the directory of the file. Unknown sections
// or keys and malformed values raise ConfigError.
ExperimentConfig parse_experiment_config(std::istream& in, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Command-line overrides applied to every ELF entry.
struct ElfOverrides {
  std::optional<double> lambda_front, lambda_rear;
  std::optional<std::string> distance, split, spatial_adapt;
  std::optional<int> feature_epoch;
};
void apply_overrides(ExperimentConfig& config, const ElfOverrides& o);

/// Front weight of the toy cell, chosen on a held-out validation split of
/// the toy data (the test split was not consulted).
inline constexpr double kToyLambdaFront = 30.0;

/// The desk-scale cross-architecture cell: 4-class toy shapes at 16x16, DM
/// with a ConvNet-3-w32-IN at 10 images per class, features from a
/// ConvNet-3-w64-IN, and MiniResNet-18 / MiniVGG-11 (width 8, BN) evaluated
/// with and without ELF.
ExperimentConfig toy_cross_arch_config(const std::filesystem::path& out_dir);

}  // namespace elfdd::exp
