#include "elfdd/exp/experiment.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "elfdd/core/error.hpp"
#include "elfdd/exp/serialize.hpp"
#include "elfdd/nn/serialize.hpp"
#include "elfdd/nn/train.hpp"
#include "elfdd/tensor/checkpoint.hpp"

#ifndef ELFDD_VERSION
#define ELFDD_VERSION "unknown"
#endif

namespace elfdd::exp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<unsigned char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("bad JSON in " + path.string() + ": " + e.what());
  }
}

// Written next to the target and renamed, so a reader never sees half a file.
void write_text_atomic(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    out << text;
    if (!out) throw FormatError("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string cell_name(std::uint64_t seed) { return "seed" + std::to_string(seed); }

fs::path extractor_dir(const ExperimentConfig& c, const std::string& key) { return c.out_dir / "extractor" / key; }

// Shape checks that train_evaluation_model would otherwise hit at run time.
void check_cache_shape(const GridEntry& e, const Shape& teacher_chw) {
  const auto sp = e.elf.split_point(e.model);
  const auto out = nn::block_output_shape(e.model, sp.block_index);
  const Shape student{out[0], out[1], out[2]};
  Shape batch{1};
  batch.insert(batch.end(), teacher_chw.begin(), teacher_chw.end());
  const Tensor dummy = Tensor::zeros(batch);
  try {
    if (e.elf.lambda_front != 0) elf::adapt_teacher(student, dummy, e.elf.spatial_adapt);
    if (e.elf.lambda_rear != 0 && elf::adapt_teacher(student, dummy, e.elf.spatial_adapt).student_pool != 1) {
      throw ConfigError("the rear of " + e.model.name() + " takes " + shape_string(student) +
                        " and cannot be fed smaller " + shape_string(teacher_chw) + " features");
    }
  } catch (const ShapeError& err) {
    throw ConfigError("entry '" + e.id + "': " + err.what());
  } catch (const ConfigError& err) {
    throw ConfigError("entry '" + e.id + "': " + err.what());
  }
}

std::string context_hash(const ExperimentConfig& c, const std::string& syn_hash, const data::LabeledDataset& test) {
  const json j{{"syn", syn_hash}, {"test", data::dataset_hash(test)}, {"seed", c.seed}};
  return hex64(fnv64(j.dump()));
}

// What an entry's results depend on beyond the entry itself.
std::string entry_context(const ExperimentConfig& c, const GridEntry& e, const std::string& ctx) {
  if (!e.use_elf) return ctx;
  const auto& t = c.extractor.train;
  json j{{"ctx", ctx},
         {"batch_size", t.batch_size},
         {"lr", t.lr},
         {"momentum", t.momentum},
         {"weight_decay", t.weight_decay},
         {"decay_at_half", t.decay_at_half}};
  if (e.source == FeatureSource::Extractor) {
    j["extractor"] = nn::config_to_json(c.extractor.model);
    j["epochs"] = std::set<int>(c.extractor.checkpoint_epochs.begin(), c.extractor.checkpoint_epochs.end());
  }
  return hex64(fnv64(j.dump()));
}

struct CellFile {
  std::string entry_hash, context_hash;
  std::uint64_t seed = 0;
  double accuracy = 0;
  FinalLosses losses;
  double seconds = 0;
  std::string trace_file;
};

json losses_json(const FinalLosses& l) {
  return {{"task", l.task}, {"front", l.front}, {"rear", l.rear}, {"total", l.total}};
}

FinalLosses losses_from(const json& j) {
  return {j.at("task").get<double>(), j.at("front").get<double>(), j.at("rear").get<double>(),
          j.at("total").get<double>()};
}

std::optional<CellFile> read_cell(const fs::path& path) {
  if (!fs::exists(path)) return std::nullopt;
  try {
    const json j = read_json(path);
    CellFile c;
    c.entry_hash = j.at("entry_hash").get<std::string>();
    c.context_hash = j.at("context_hash").get<std::string>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.accuracy = j.at("accuracy").get<double>();
    c.losses = losses_from(j.at("final_losses"));
    c.seconds = j.at("seconds").get<double>();
    c.trace_file = j.at("trace_file").get<std::string>();
    return c;
  } catch (const std::exception&) {
    return std::nullopt;  // damaged by an interrupted run: redo the cell
  }
}

void write_cell(const fs::path& path, const CellFile& c) {
  const json j{{"entry_hash", c.entry_hash},     {"context_hash", c.context_hash},
               {"seed", c.seed},                 {"accuracy", c.accuracy},
               {"final_losses", losses_json(c.losses)}, {"seconds", c.seconds},
               {"trace_file", c.trace_file}};
  write_text_atomic(path, j.dump(2) + "\n");
}

std::string trace_csv(const elf::StepTrace& t) {
  std::ostringstream out;
  out << std::setprecision(17) << "step,task,front,rear,total\n";
  for (std::size_t i = 0; i < t.total.size(); ++i) {
    out << i << ',' << t.task[i] << ',' << t.front[i] << ',' << t.rear[i] << ',' << t.total[i] << '\n';
  }
  return out.str();
}

}  // namespace

double top1_accuracy(const Tensor& logits, std::span<const int> labels) {
  if (labels.empty()) throw ValueError("accuracy of an empty set");
  if (logits.rank() != 2 || logits.shape()[0] != static_cast<std::int64_t>(labels.size())) {
    throw ShapeError("logits " + shape_string(logits.shape()) + " for " + std::to_string(labels.size()) + " labels");
  }
  const auto pred = nn::argmax_rows(logits);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += pred[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

double evaluate_accuracy(nn::ModelState& model, const data::LabeledDataset& test) {
  if (test.size() == 0) throw ValueError("evaluate_accuracy: empty test set");
  model.mode = nn::Mode::Eval;
  return top1_accuracy(nn::predict(model, test.images.to(model.config.dtype)), test.labels);
}

std::pair<data::LabeledDataset, data::LabeledDataset> DatasetSpec::load() const {
  if (kind == Kind::Toy) {
    toy.validate();
    if (test_per_class < 1) throw ConfigError("test_per_class must be positive");
    return data::toy_train_test(toy, test_per_class);
  }
  if (cifar_train.empty() || cifar_test.empty()) throw ConfigError("cifar10 data needs train and test files");
  std::vector<unsigned char> bytes;
  for (const auto& p : cifar_train) {
    auto b = read_bytes(p);
    bytes.insert(bytes.end(), b.begin(), b.end());
  }
  auto train = data::parse_cifar10_binary(bytes);
  auto test = data::parse_cifar10_binary(read_bytes(cifar_test));
  return {std::move(train), std::move(test)};
}

std::array<std::int64_t, 3> DatasetSpec::image_shape() const {
  if (kind == Kind::Toy) return {toy.channels, toy.resolution, toy.resolution};
  return {3, 32, 32};
}

int DatasetSpec::class_count() const { return kind == Kind::Toy ? toy.class_count : 10; }

std::string to_string(FeatureSource s) { return s == FeatureSource::Extractor ? "extractor" : "eval-arch"; }

FeatureSource parse_feature_source(const std::string& s) {
  if (s == "extractor") return FeatureSource::Extractor;
  if (s == "eval-arch" || s == "eval_arch") return FeatureSource::EvalArch;
  throw ConfigError("unknown feature source '" + s + "' (expected extractor or eval-arch)");
}

std::string GridEntry::hash() const {
  const json j{{"model", nn::config_to_json(model)},
               {"use_elf", use_elf},
               {"elf", elf_to_json(elf)},
               {"source", to_string(source)}};
  return hex64(fnv64(j.dump()));
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("the seed list is empty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ConfigError("the seed list has duplicates");
  }
  if (grid.empty()) throw ConfigError("the evaluation grid is empty");
  if (workers < 1) throw ConfigError("workers must be at least 1");
  const auto shape = data.image_shape();
  const int k = data.class_count();
  if (data.kind == DatasetSpec::Kind::Toy) data.toy.validate();
  if (distill.path.empty()) {
    distill.config.validate();
    if (distill.config.model.input_shape != shape || distill.config.model.num_classes != k) {
      throw ConfigError("distillation model " + distill.config.model.name() + " does not fit the dataset");
    }
    if (data.kind == DatasetSpec::Kind::Toy && (distill.config.real_per_class > data.toy.samples_per_class ||
                                                distill.config.ipc > data.toy.samples_per_class)) {
      throw ConfigError("distillation draws more images per class than the toy set has (" +
                        std::to_string(data.toy.samples_per_class) + ")");
    }
  }
  bool needs_extractor = false;
  std::set<std::string> ids;
  for (const auto& e : grid) {
    if (e.id.empty() || e.id.find_first_of("/\\ ") != std::string::npos || e.id[0] == '.') {
      throw ConfigError("bad grid entry id '" + e.id + "'");
    }
    if (!ids.insert(e.id).second) throw ConfigError("duplicate grid entry id '" + e.id + "'");
    e.model.validate();
    if (e.model.input_shape != shape || e.model.num_classes != k) {
      throw ConfigError("entry '" + e.id + "': " + e.model.name() + " does not fit the dataset");
    }
    e.elf.validate(e.model);
    if (!e.use_elf && !e.elf.use_task) throw ConfigError("entry '" + e.id + "' has no loss term");
    if (e.use_elf && e.source == FeatureSource::Extractor) needs_extractor = true;
  }
  if (!needs_extractor) return;
  const auto& ex = extractor.model;
  ex.validate();
  if (ex.family != nn::Family::ConvNet) throw ConfigError("feature extractor must be a ConvNet, got " + ex.name());
  if (ex.input_shape != shape || ex.num_classes != k) {
    throw ConfigError("feature extractor " + ex.name() + " does not fit the dataset");
  }
  const auto out = nn::block_output_shape(ex, nn::num_feature_blocks(ex));
  const std::set<int> epochs(extractor.checkpoint_epochs.begin(), extractor.checkpoint_epochs.end());
  for (const auto& e : grid) {
    if (!e.use_elf || e.source != FeatureSource::Extractor) continue;
    if (!epochs.count(e.elf.feature_epoch)) {
      throw ConfigError("entry '" + e.id + "' uses extractor epoch " + std::to_string(e.elf.feature_epoch) +
                        ", which is not among the checkpoint epochs");
    }
    check_cache_shape(e, {out[0], out[1], out[2]});
  }
}

std::pair<double, double> mean_std(const std::vector<double>& values) {
  if (values.empty()) return {0.0, 0.0};
  double m = 0;
  for (double v : values) m += v;
  m /= static_cast<double>(values.size());
  double ss = 0;
  for (double v : values) ss += (v - m) * (v - m);
  return {m, std::sqrt(ss / static_cast<double>(values.size()))};
}

data::SyntheticDataset prepare_synthetic(const ExperimentConfig& config, const data::LabeledDataset& train) {
  if (!config.distill.path.empty()) return distill::load_synthetic(config.distill.path);
  const auto& dc = config.distill.config;
  const fs::path dir = config.out_dir / "synthetic";
  const std::string real_hash = data::dataset_hash(train);
  if (fs::exists(dir / "manifest.json") && fs::exists(dir / "synthetic.elft")) {
    const json m = read_json(dir / "manifest.json");
    if (m.value("config_hash", "") == dc.hash() && m.value("real_hash", "") == real_hash) {
      return distill::load_synthetic(dir / "synthetic.elft");
    }
  }
  auto result = distill::run_distillation(train, dc);
  distill::write_outputs(dir, result, dc, real_hash);
  return result.syn;
}

namespace {

// Identity of a trained teacher: its architecture, schedule and real data.
std::string teacher_key(const nn::ModelConfig& model, const nn::TrainOptions& t, const std::vector<int>& epochs,
                        const std::string& real_hash) {
  json ep = json::array();
  for (int e : std::set<int>(epochs.begin(), epochs.end())) ep.push_back(e);
  const json j{{"model", nn::config_to_json(model)},
               {"batch_size", t.batch_size},
               {"lr", t.lr},
               {"momentum", t.momentum},
               {"weight_decay", t.weight_decay},
               {"decay_at_half", t.decay_at_half},
               {"seed", {t.seed.seed, t.seed.counter}},
               {"epochs", ep},
               {"real", real_hash}};
  return to_string(model.family) + "-" + hex64(fnv64(j.dump()));
}

elf::ExtractorCheckpoint teacher_checkpoint(const ExperimentConfig& config, const GridEntry& entry,
                                            const data::LabeledDataset& train) {
  auto opts = config.extractor.train;
  const std::string real_hash = data::dataset_hash(train);
  if (entry.source == FeatureSource::Extractor) {
    opts.seed = prng_split(PrngState{config.seed, 0}, 0xe0);
    const auto& epochs = config.extractor.checkpoint_epochs;
    const fs::path dir = extractor_dir(config, teacher_key(config.extractor.model, opts, epochs, real_hash));
    if (!fs::exists(dir / "manifest.json")) {
      elf::ExtractorOptions eo;
      eo.checkpoint_epochs = epochs;
      eo.train = opts;
      elf::save_extractor_checkpoints(dir, elf::train_feature_extractor(config.extractor.model, train, eo));
    }
    return elf::load_extractor_checkpoint(dir, entry.elf.feature_epoch);
  }
  // An evaluation-architecture model trained on the real set.
  opts.seed = prng_split(PrngState{config.seed, 0}, 0xe1);
  opts.epochs = entry.elf.feature_epoch;
  const fs::path dir = extractor_dir(config, teacher_key(entry.model, opts, {opts.epochs}, real_hash));
  if (!fs::exists(dir / "manifest.json")) {
    auto model = nn::build_model(entry.model, prng_split(opts.seed, 0xe7));
    if (opts.epochs > 0) nn::train_classifier(model, train.images.to(entry.model.dtype), train.labels, opts);
    elf::save_extractor_checkpoints(dir, {{opts.epochs, model}});
  }
  return elf::load_extractor_checkpoint(dir, opts.epochs);
}

}  // namespace

fs::path prepare_cache(const ExperimentConfig& config, const GridEntry& entry, const data::LabeledDataset& train,
                       const data::SyntheticDataset& syn) {
  const auto ckpt = teacher_checkpoint(config, entry, train);
  const int block = entry.source == FeatureSource::Extractor ? 0 : entry.elf.split_point(entry.model).block_index;
  const std::string syn_hash = data::dataset_hash(syn.as_labeled());
  const json key{{"teacher", nn::config_to_json(ckpt.model.config)},
                 {"teacher_params", hex64(hash_tensors({ckpt.model.params.begin(), ckpt.model.params.end()}))},
                 {"epoch", ckpt.epoch},
                 {"block", block},
                 {"syn", syn_hash}};
  const fs::path path = config.out_dir / "caches" / (to_string(entry.source) + "-" + hex64(fnv64(key.dump())) + ".elfc");
  if (!fs::exists(path)) {
    fs::create_directories(path.parent_path());
    auto cache = elf::extract_features(ckpt, syn, block);
    const fs::path tmp = path.string() + ".tmp";
    elf::save_cache(cache, tmp);
    fs::rename(tmp, path);
  }
  return path;
}

CellResult run_cell(const GridEntry& entry, std::uint64_t seed, std::uint64_t experiment_seed,
                    const data::SyntheticDataset& syn, const elf::FeatureCache* cache,
                    const data::LabeledDataset& test) {
  const auto t0 = std::chrono::steady_clock::now();
  // Keyed by the seed value only, so a baseline and its ELF twin share the
  // initialization and batch order, and adding entries never moves a cell.
  const PrngState cell_seed = prng_split(PrngState{experiment_seed, 0}, seed);
  auto run = elf::train_evaluation_model(entry.model, syn, entry.use_elf ? cache : nullptr, entry.elf, cell_seed);
  CellResult r;
  r.accuracy = evaluate_accuracy(run.model, test);
  if (!run.trace.total.empty()) {
    r.final_losses = {run.trace.task.back(), run.trace.front.back(), run.trace.rear.back(), run.trace.total.back()};
  }
  r.trace = std::move(run.trace);
  r.seconds = seconds_since(t0);
  return r;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  fs::create_directories(config.out_dir);
  auto [train, test] = config.data.load();
  const auto syn = prepare_synthetic(config, train);
  const std::string syn_hash = data::dataset_hash(syn.as_labeled());
  const std::string ctx = context_hash(config, syn_hash, test);
  const std::string distill_model =
      config.distill.path.empty() ? config.distill.config.model.name() : std::string("external");
  const std::string method = syn.method.empty() ? std::string("unknown") : syn.method;

  // Cells are stored by content, so entries that differ only in their id
  // (an ablation row equal to a grid entry, say) share results.
  const std::size_t n_entries = config.grid.size();
  const std::size_t n_seeds = config.seeds.size();
  std::vector<std::string> hashes(n_entries), contexts(n_entries), dirs(n_entries);
  std::map<std::string, std::size_t> first_with_dir;
  std::vector<std::size_t> owner(n_entries);
  for (std::size_t i = 0; i < n_entries; ++i) {
    hashes[i] = config.grid[i].hash();
    contexts[i] = entry_context(config, config.grid[i], ctx);
    dirs[i] = "cells/" + hashes[i] + "-" + contexts[i];
    owner[i] = first_with_dir.emplace(dirs[i], i).first->second;
  }

  std::vector<std::string> errors(n_entries);
  std::vector<std::vector<std::optional<CellFile>>> cells(n_entries, std::vector<std::optional<CellFile>>(n_seeds));
  struct Job {
    std::size_t entry, seed_index;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < n_entries; ++i) {
    if (owner[i] != i) continue;
    for (std::size_t s = 0; s < n_seeds; ++s) {
      auto c = read_cell(config.out_dir / dirs[i] / (cell_name(config.seeds[s]) + ".json"));
      if (c && c->entry_hash == hashes[i] && c->context_hash == contexts[i] && c->seed == config.seeds[s]) {
        cells[i][s] = std::move(c);
      } else {
        jobs.push_back({i, s});
      }
    }
  }

  // Caches are built up front, one at a time, only for entries with work left.
  std::vector<std::optional<elf::FeatureCache>> caches(n_entries);
  std::set<std::size_t> pending;
  for (const auto& j : jobs) pending.insert(j.entry);
  for (std::size_t i : pending) {
    const auto& e = config.grid[i];
    if (!e.use_elf) continue;
    try {
      caches[i] = elf::load_cache(prepare_cache(config, e, train, syn), syn_hash);
    } catch (const std::exception& err) {
      errors[i] = std::string("feature cache: ") + err.what();
    }
  }

  ExperimentResult result;
  std::atomic<std::size_t> next{0};
  std::atomic<int> trained{0};
  std::mutex mu;
  auto worker = [&] {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= jobs.size()) return;
      const auto [i, s] = jobs[k];
      {
        std::lock_guard lock(mu);
        if (!errors[i].empty()) continue;
      }
      const auto& e = config.grid[i];
      const std::uint64_t seed = config.seeds[s];
      try {
        auto r = run_cell(e, seed, config.seed, syn, caches[i] ? &*caches[i] : nullptr, test);
        CellFile c{hashes[i], contexts[i], seed, r.accuracy, r.final_losses, r.seconds,
                   dirs[i] + "/" + cell_name(seed) + ".trace.csv"};
        write_text_atomic(config.out_dir / c.trace_file, trace_csv(r.trace));
        write_cell(config.out_dir / dirs[i] / (cell_name(seed) + ".json"), c);
        trained.fetch_add(1);
        std::lock_guard lock(mu);
        cells[i][s] = std::move(c);
      } catch (const std::exception& err) {
        std::lock_guard lock(mu);
        if (errors[i].empty()) errors[i] = "seed " + std::to_string(seed) + ": " + err.what();
      }
    }
  };
  const int n_workers = std::max(1, std::min<int>(config.workers, static_cast<int>(jobs.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  result.cells_trained = trained.load();
  result.cells_reused = static_cast<int>(first_with_dir.size() * n_seeds - jobs.size());

  for (std::size_t i = 0; i < n_entries; ++i) {
    const auto& e = config.grid[i];
    const std::size_t o = owner[i];
    MetricsRecord r;
    r.run_id = e.id;
    r.config_hash = hashes[i];
    r.eval_model = e.model.name();
    r.distill_model = distill_model;
    r.method = method;
    r.elf = e.use_elf;
    r.seeds = config.seeds;
    FinalLosses sum;
    for (const auto& c : cells[o]) {
      if (!c) continue;
      r.accuracies.push_back(c->accuracy);
      r.wall_seconds += c->seconds;
      sum.task += c->losses.task;
      sum.front += c->losses.front;
      sum.rear += c->losses.rear;
      sum.total += c->losses.total;
      r.trace_files.push_back(c->trace_file);
    }
    const auto n = static_cast<double>(r.accuracies.size());
    if (n > 0) r.final_losses = {sum.task / n, sum.front / n, sum.rear / n, sum.total / n};
    std::tie(r.mean, r.std) = mean_std(r.accuracies);
    if (!errors[o].empty() || r.accuracies.size() != n_seeds) {
      r.status = "failed";
      r.error = errors[o].empty() ? "incomplete" : errors[o];
      ++result.failed_entries;
    }
    result.records.push_back(std::move(r));
  }

  const fs::path report_dir = config.out_dir / config.report_subdir;
  save_records(report_dir / "records.json", result.records);
  write_text_atomic(report_dir / "records.csv", records_csv(result.records));
  json entries = json::object();
  for (std::size_t i = 0; i < n_entries; ++i) entries[config.grid[i].id] = hashes[i];
  const json manifest{{"version", version_string()},
                      {"created", utc_now()},
                      {"config", experiment_to_json(config)},
                      {"hashes",
                       {{"train", data::dataset_hash(train)},
                        {"test", data::dataset_hash(test)},
                        {"synthetic", syn_hash},
                        {"context", ctx},
                        {"entries", entries}}},
                      {"cells_trained", result.cells_trained},
                      {"cells_reused", result.cells_reused},
                      {"failed_entries", result.failed_entries}};
  write_text_atomic(report_dir / "manifest.json", manifest.dump(2) + "\n");
  return result;
}

void save_records(const fs::path& path, const std::vector<MetricsRecord>& records) {
  json list = json::array();
  for (const auto& r : records) list.push_back(record_to_json(r));
  write_text_atomic(path, json{{"schema", kRecordsSchema}, {"records", list}}.dump(2) + "\n");
}

std::vector<MetricsRecord> load_records(const fs::path& path) {
  const json j = read_json(path);
  if (j.value("schema", "") != kRecordsSchema) {
    throw FormatError(path.string() + ": expected schema " + std::string(kRecordsSchema));
  }
  std::vector<MetricsRecord> out;
  for (const auto& r : j.at("records")) out.push_back(record_from_json(r));
  return out;
}

std::string version_string() { return ELFDD_VERSION; }

}  // namespace elfdd::exp
