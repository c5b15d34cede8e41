#include "elfdd/elf/elf.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "elfdd/core/error.hpp"
#include "elfdd/nn/serialize.hpp"
#include "elfdd/tensor/checkpoint.hpp"
#include "elfdd/tensor/ops.hpp"

namespace elfdd::elf {

using json = nlohmann::json;

namespace {

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Shape chw(const std::array<std::int64_t, 3>& a) { return {a[0], a[1], a[2]}; }

Tensor avg_pool_tensor(const Tensor& t, std::int64_t k) {
  if (k == 1) return t;
  Graph g;
  return ops::avg_pool2d(g.constant(t), k, k).value();
}

// Integer factor f with big == small * f in both H and W.
std::int64_t pool_factor(const Shape& big, const Shape& small, const std::string& what) {
  const auto fh = big[1] / small[1], fw = big[2] / small[2];
  if (fh != fw || fh * small[1] != big[1] || fw * small[2] != big[2]) {
    throw ConfigError(what + ": cannot average-pool " + shape_string(big) + " to " + shape_string(small));
  }
  return fh;
}

void put_u16(std::ostream& out, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  out.write(b, 2);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError("feature cache: truncated header");
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

json meta_to_json(const CacheMeta& m) {
  return {{"extractor", nn::config_to_json(m.extractor)},
          {"extractor_epoch", m.extractor_epoch},
          {"block_index", m.block_index},
          {"dataset_hash", m.dataset_hash},
          {"created", m.created}};
}

CacheMeta meta_from_json(const json& j) {
  try {
    CacheMeta m;
    m.extractor = nn::config_from_json(j.at("extractor"));
    m.extractor_epoch = j.at("extractor_epoch").get<int>();
    m.block_index = j.at("block_index").get<int>();
    m.dataset_hash = j.at("dataset_hash").get<std::string>();
    m.created = j.at("created").get<std::string>();
    return m;
  } catch (const json::exception& e) {
    throw FormatError(std::string("feature cache: bad metadata: ") + e.what());
  }
}

std::vector<int> labels_of(const data::SyntheticDataset& syn, std::span<const std::int64_t> rows) {
  std::vector<int> y;
  y.reserve(rows.size());
  for (auto r : rows) y.push_back(syn.labels[static_cast<std::size_t>(r)]);
  return y;
}

// Student-side reconciliation of a cached batch against a front output of
// shape `student` (C x H x W, no batch axis).
struct FrontTarget {
  std::int64_t student_pool = 1;
  Tensor teacher;
};

FrontTarget front_target(const FeatureCache& cache, const Shape& student, std::span<const std::int64_t> ids,
                         SpatialAdapt mode) {
  auto a = adapt_teacher(student, cache.gather(ids), mode);
  return {a.student_pool, a.teacher};
}

// Cached features resized for the rear input; the rear cannot take a map
// smaller than its own input.
Tensor rear_input(const FeatureCache& cache, const Shape& rear_in, std::span<const std::int64_t> ids,
                  SpatialAdapt mode) {
  auto a = adapt_teacher(rear_in, cache.gather(ids), mode);
  if (a.student_pool != 1) {
    throw ConfigError("rear section expects " + shape_string(rear_in) + " but the cached features are " +
                      shape_string(cache.feature_shape()) + "; they cannot be enlarged");
  }
  return a.teacher;
}

}  // namespace

std::string to_string(Distance d) {
  switch (d) {
    case Distance::MAE: return "mae";
    case Distance::MSE: return "mse";
    case Distance::Cos: return "cos";
    case Distance::CE: return "ce";
  }
  return "?";
}

Distance parse_distance(const std::string& s) {
  if (s == "mae") return Distance::MAE;
  if (s == "mse") return Distance::MSE;
  if (s == "cos") return Distance::Cos;
  if (s == "ce") return Distance::CE;
  throw ConfigError("unknown distance '" + s + "' (expected mae, mse, cos or ce)");
}

std::string to_string(SpatialAdapt a) { return a == SpatialAdapt::Off ? "off" : "avgpool"; }

SpatialAdapt parse_spatial_adapt(const std::string& s) {
  if (s == "off" || s == "none") return SpatialAdapt::Off;
  if (s == "avgpool" || s == "on") return SpatialAdapt::AvgPoolToMatch;
  throw ConfigError("unknown spatial adaptation '" + s + "' (expected off or avgpool)");
}

Shape FeatureCache::feature_shape() const {
  if (entries.empty()) throw ValueError("feature cache is empty");
  return entries.begin()->second.shape();
}

Tensor FeatureCache::gather(std::span<const std::int64_t> ids) const {
  if (ids.empty()) throw ValueError("feature cache: empty id list");
  const Shape fs = feature_shape();
  const std::int64_t per = entries.begin()->second.numel();
  std::vector<double> out;
  out.reserve(ids.size() * static_cast<std::size_t>(per));
  DType dt = entries.begin()->second.dtype();
  for (auto id : ids) {
    auto it = entries.find(id);
    if (it == entries.end()) throw ValueError("feature cache has no entry for synthetic image " + std::to_string(id));
    auto v = it->second.to_vector();
    out.insert(out.end(), v.begin(), v.end());
  }
  Shape shape{static_cast<std::int64_t>(ids.size())};
  shape.insert(shape.end(), fs.begin(), fs.end());
  return Tensor::from(shape, out).to(dt);
}

void FeatureCache::check_against(const data::SyntheticDataset& syn) const {
  if (size() != syn.size()) {
    throw ValueError("feature cache holds " + std::to_string(size()) + " entries, the synthetic set has " +
                     std::to_string(syn.size()) + " images");
  }
  const Shape fs = feature_shape();
  for (const auto& [id, t] : entries) {
    if (t.shape() != fs) throw ShapeError("feature cache entry " + std::to_string(id) + " has a different shape");
    if (id < 0 || id >= syn.size()) throw ValueError("feature cache id " + std::to_string(id) + " out of range");
  }
  const auto h = data::dataset_hash(syn.as_labeled());
  if (h != meta.dataset_hash) {
    throw ValueError("feature cache was extracted from synthetic set " + meta.dataset_hash + ", not " + h);
  }
}

nn::SplitPoint ElfConfig::split_point(const nn::ModelConfig& eval_model) const {
  return split.empty() ? nn::default_split(eval_model) : nn::resolve_split(eval_model, split);
}

void ElfConfig::validate(const nn::ModelConfig& eval_model) const {
  if (!(lambda_front >= 0.0) || !(lambda_rear >= 0.0)) throw ConfigError("ELF weights must be nonnegative");
  if (epochs < 0) throw ConfigError("evaluation epochs must be nonnegative");
  if (!(lr > 0.0)) throw ConfigError("evaluation learning rate must be positive");
  if (batch_size < 1) throw ConfigError("evaluation batch size must be positive");
  if (feature_epoch < 0) throw ConfigError("feature epoch must be nonnegative");
  if (!use_task && lambda_front == 0.0 && lambda_rear == 0.0) {
    throw ConfigError("without the task term at least one ELF weight must be positive");
  }
  augment.validate();
  nn::validate_split(eval_model, split_point(eval_model));
}

nn::TrainOptions ElfConfig::train_options(PrngState seed) const {
  nn::TrainOptions o;
  o.epochs = epochs;
  o.batch_size = batch_size;
  o.lr = lr;
  o.momentum = momentum;
  o.weight_decay = weight_decay;
  o.decay_at_half = decay_at_half;
  o.seed = seed;
  return o;
}

std::vector<ExtractorCheckpoint> train_feature_extractor(const nn::ModelConfig& arch, const data::LabeledDataset& real,
                                                         const ExtractorOptions& options) {
  arch.validate();
  if (arch.family != nn::Family::ConvNet) throw ConfigError("feature extractor must be a ConvNet, got " + arch.name());
  const int last = nn::num_feature_blocks(arch);
  const auto out_shape = nn::block_output_shape(arch, last);
  if (options.target_channels && *options.target_channels != out_shape[0]) {
    throw ConfigError("extractor " + arch.name() + " ends with " + std::to_string(out_shape[0]) +
                      " channels but the evaluation split has " + std::to_string(*options.target_channels));
  }
  if (arch.num_classes != real.class_count) {
    throw ConfigError("extractor has " + std::to_string(arch.num_classes) + " classes, the data " +
                      std::to_string(real.class_count));
  }
  std::set<int> wanted(options.checkpoint_epochs.begin(), options.checkpoint_epochs.end());
  if (wanted.empty()) wanted.insert(0);
  if (*wanted.begin() < 0) throw ConfigError("checkpoint epochs must be nonnegative");

  auto model = nn::build_model(arch, prng_split(options.train.seed, 0xe7));
  std::vector<ExtractorCheckpoint> out;
  if (wanted.count(0)) out.push_back({0, model});
  auto opts = options.train;
  opts.epochs = *wanted.rbegin();
  if (opts.epochs > 0) {
    nn::train_classifier(model, real.images.to(arch.dtype), real.labels, opts, {}, [&](int epoch, double) {
      if (wanted.count(epoch + 1)) out.push_back({epoch + 1, model});
    });
  }
  return out;
}

void save_extractor_checkpoints(const std::filesystem::path& dir, const std::vector<ExtractorCheckpoint>& ckpts) {
  std::filesystem::create_directories(dir);
  json list = json::array();
  for (const auto& c : ckpts) {
    const std::string file = "extractor_e" + std::to_string(c.epoch) + ".elft";
    nn::save_model(dir / file, c.model);
    list.push_back({{"epoch", c.epoch}, {"file", file}, {"model", c.model.config.name()}});
  }
  std::ofstream out(dir / "manifest.json");
  out << json{{"checkpoints", list}}.dump(2) << "\n";
  if (!out) throw FormatError("cannot write " + (dir / "manifest.json").string());
}

ExtractorCheckpoint load_extractor_checkpoint(const std::filesystem::path& dir, int epoch) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw FormatError("no extractor manifest in " + dir.string());
  json m;
  try {
    m = json::parse(in);
    for (const auto& c : m.at("checkpoints")) {
      if (c.at("epoch").get<int>() == epoch) return {epoch, nn::load_model(dir / c.at("file").get<std::string>())};
    }
  } catch (const json::exception& e) {
    throw FormatError("bad extractor manifest in " + dir.string() + ": " + e.what());
  }
  throw ConfigError("no extractor checkpoint for epoch " + std::to_string(epoch) + " in " + dir.string());
}

FeatureCache extract_features(const ExtractorCheckpoint& extractor, const data::SyntheticDataset& syn,
                              int block_index, std::int64_t chunk) {
  if (syn.size() == 0) throw ValueError("extract_features: empty synthetic set");
  auto model = extractor.model;
  const auto& cfg = model.config;
  const auto img = syn.images.shape();
  if (img.size() != 4 || img[1] != cfg.input_shape[0] || img[2] != cfg.input_shape[1] ||
      img[3] != cfg.input_shape[2]) {
    throw ShapeError("extractor " + cfg.name() + " takes " + shape_string(chw(cfg.input_shape)) +
                     " images, the synthetic set has " + shape_string(img));
  }
  FeatureCache cache;
  cache.meta.extractor = cfg;
  cache.meta.extractor_epoch = extractor.epoch;
  const int last = nn::num_feature_blocks(cfg);
  if (block_index < 0 || block_index > last) {
    throw ValueError("extract_features: block " + std::to_string(block_index) + " outside 1.." + std::to_string(last));
  }
  cache.meta.block_index = block_index == 0 ? last : block_index;
  cache.meta.dataset_hash = data::dataset_hash(syn.as_labeled());
  cache.meta.created = utc_now();
  const Tensor images = syn.images.to(cfg.dtype);
  const std::int64_t n = syn.size();
  for (std::int64_t b = 0; b < n; b += chunk) {
    const auto e = std::min(n, b + chunk);
    std::vector<std::int64_t> rows;
    for (auto i = b; i < e; ++i) rows.push_back(i);
    const Tensor f = nn::feature_tap(model, data::gather_rows(images, rows), cache.meta.block_index, nn::Mode::Eval);
    for (auto i = b; i < e; ++i) {
      const std::vector<std::int64_t> one{i - b};
      Tensor row = data::gather_rows(f, one);
      cache.entries.emplace(i, row.reshape(Shape(f.shape().begin() + 1, f.shape().end())));
    }
  }
  return cache;
}

void save_cache(const FeatureCache& cache, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out.write("ELFC", 4);
  put_u16(out, kCacheVersion);
  const std::string meta = meta_to_json(cache.meta).dump();
  put_u32(out, static_cast<std::uint32_t>(meta.size()));
  out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  NamedTensors ts;
  for (const auto& [id, t] : cache.entries) ts.emplace_back(std::to_string(id), t);
  write_checkpoint(out, ts);
  if (!out) throw FormatError("write failed for " + path.string());
}

FeatureCache load_cache(const std::filesystem::path& path, const std::optional<std::string>& expected_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open feature cache " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::string(magic, 4) != "ELFC") {
    throw FormatError(path.string() + " is not a feature cache (bad magic bytes)");
  }
  unsigned char v[2];
  if (!in.read(reinterpret_cast<char*>(v), 2)) throw FormatError("feature cache: truncated header");
  const int version = v[0] | (v[1] << 8);
  if (version != kCacheVersion) throw FormatError("feature cache version " + std::to_string(version) + " unsupported");
  const auto len = get_u32(in);
  std::string meta(len, '\0');
  if (!in.read(meta.data(), len)) throw FormatError("feature cache: truncated metadata");
  FeatureCache cache;
  try {
    cache.meta = meta_from_json(json::parse(meta));
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("feature cache: metadata is not JSON: ") + e.what());
  }
  for (auto& [name, t] : read_checkpoint(in)) {
    std::size_t used = 0;
    std::int64_t id = -1;
    try {
      id = std::stoll(name, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != name.size() || name.empty()) throw FormatError("feature cache: bad entry name '" + name + "'");
    cache.entries.emplace(id, std::move(t));
  }
  if (expected_hash && *expected_hash != cache.meta.dataset_hash) {
    throw ValueError("feature cache " + path.string() + " was extracted from synthetic set " +
                     cache.meta.dataset_hash + ", this experiment uses " + *expected_hash);
  }
  return cache;
}

Var feature_distance(Distance kind, Var student, const Tensor& teacher) {
  if (student.shape() != teacher.shape()) {
    throw ShapeError("feature distance: student " + shape_string(student.shape()) + " vs teacher " +
                     shape_string(teacher.shape()));
  }
  Graph& g = student.graph();
  Var t = g.constant(teacher.to(student.value().dtype()));
  switch (kind) {
    case Distance::MAE: return ops::mean(ops::abs(ops::sub(student, t)));
    case Distance::MSE: return ops::mean(ops::square(ops::sub(student, t)));
    case Distance::Cos: return ops::cosine_distance_rows(ops::flatten(student), ops::flatten(t));
    case Distance::CE: return ops::soft_cross_entropy(ops::flatten(student), ops::softmax_rows(ops::flatten(t).value()));
  }
  throw ValueError("bad distance kind");
}

double feature_distance(Distance kind, const Tensor& student, const Tensor& teacher) {
  Graph g;
  return feature_distance(kind, g.constant(student), teacher).value().item();
}

Adapted adapt_teacher(const Shape& student_shape, const Tensor& teacher, SpatialAdapt mode) {
  const Shape ts(teacher.shape().begin() + 1, teacher.shape().end());
  if (student_shape.size() != 3 || ts.size() != 3) {
    throw ShapeError("feature maps must be C x H x W: student " + shape_string(student_shape) + ", teacher " +
                     shape_string(ts));
  }
  if (student_shape[0] != ts[0]) {
    throw ShapeError("channel mismatch between student features " + shape_string(student_shape) +
                     " and cached features " + shape_string(ts));
  }
  if (student_shape == ts) return {1, teacher};
  if (mode == SpatialAdapt::Off) {
    throw ShapeError("spatial mismatch between student features " + shape_string(student_shape) +
                     " and cached features " + shape_string(ts) + " (spatial adaptation is off)");
  }
  if (ts[1] >= student_shape[1] && ts[2] >= student_shape[2]) {
    return {1, avg_pool_tensor(teacher, pool_factor(ts, student_shape, "spatial adaptation"))};
  }
  if (ts[1] <= student_shape[1] && ts[2] <= student_shape[2]) {
    return {pool_factor(student_shape, ts, "spatial adaptation"), teacher};
  }
  throw ShapeError("spatial adaptation needs one map to contain the other: " + shape_string(student_shape) + " vs " +
                   shape_string(ts));
}

Var front_loss(Graph& g, const FeatureCache& cache, const nn::Section& front, const nn::Binding& params, Var x,
               std::span<const std::int64_t> ids, Distance kind, SpatialAdapt adapt, nn::Mode mode) {
  Var h = front.run(g, params, x, mode);
  const Shape hs(h.shape().begin() + 1, h.shape().end());
  auto target = front_target(cache, hs, ids, adapt);
  if (target.student_pool > 1) h = ops::avg_pool2d(h, target.student_pool, target.student_pool);
  return feature_distance(kind, h, target.teacher);
}

Var rear_loss(Graph& g, const FeatureCache& cache, const nn::Section& rear, const nn::Binding& params,
              std::span<const std::int64_t> ids, std::span<const int> labels, SpatialAdapt adapt, nn::Mode mode) {
  if (labels.size() != ids.size()) throw ShapeError("rear_loss: ids/labels mismatch");
  const auto& cfg = rear.model().config;
  const Shape rear_in = rear.begin() == 0 ? chw(cfg.input_shape) : chw(nn::block_output_shape(cfg, rear.begin()));
  Var f = g.constant(rear_input(cache, rear_in, ids, adapt).to(cfg.dtype));
  const auto saved = rear.model().bn_stats;
  Var out = ops::softmax_cross_entropy(rear.run(g, params, f, mode), labels);
  rear.model().bn_stats = saved;
  return out;
}

Var task_loss(Graph& g, nn::ModelState& model, const nn::Binding& params, Var x, std::span<const int> labels,
              nn::Mode mode) {
  return ops::softmax_cross_entropy(nn::forward(g, model, params, x, mode), labels);
}

Var elf_total_loss(Var task, Var front, Var rear, double lambda_front, double lambda_rear) {
  Var total = task;
  auto accumulate = [&](Var term, double weight) {
    Var t = ops::scale(term, weight);
    total = total.valid() ? ops::add(total, t) : t;
  };
  if (lambda_front != 0.0) accumulate(front, lambda_front);
  if (lambda_rear != 0.0) accumulate(rear, lambda_rear);
  if (!total.valid()) throw ValueError("ELF objective has no terms");
  return total;
}

double elf_total_loss(double task, double front, double rear, double lambda_front, double lambda_rear) {
  double total = task;
  if (lambda_front != 0.0) total += lambda_front * front;
  if (lambda_rear != 0.0) total += lambda_rear * rear;
  return total;
}

EvalRun train_evaluation_model(const nn::ModelConfig& eval_model, const data::SyntheticDataset& syn,
                               const FeatureCache* cache, const ElfConfig& config, PrngState seed) {
  eval_model.validate();
  config.validate(eval_model);
  if (eval_model.num_classes != syn.class_count) {
    throw ConfigError("evaluation model has " + std::to_string(eval_model.num_classes) + " classes, S has " +
                      std::to_string(syn.class_count));
  }
  const bool use_front = cache && config.lambda_front != 0.0;
  const bool use_rear = cache && config.lambda_rear != 0.0;
  const bool elf = use_front || use_rear;
  if (!config.use_task && !elf) throw ConfigError("without the task term a feature cache is required");
  const auto sp = config.split_point(eval_model);
  if (elf) {
    cache->check_against(syn);
    const Shape split_shape = chw(nn::block_output_shape(eval_model, sp.block_index));
    // Fail before training on channel or spatial incompatibility.
    (void)adapt_teacher(split_shape, cache->gather(std::vector<std::int64_t>{0}), config.spatial_adapt);
    if (use_rear) (void)rear_input(*cache, split_shape, std::vector<std::int64_t>{0}, config.spatial_adapt);
  }

  EvalRun run{nn::build_model(eval_model, prng_split(seed, 0)), {}};
  auto& model = run.model;
  const auto options = config.train_options(prng_split(seed, 1));
  const Tensor images = syn.images.to(eval_model.dtype);
  const std::int64_t n = syn.size();
  const auto shape = syn.as_labeled().image_shape();
  auto [front, rear] = nn::split_model(model, sp);

  // Same random stream layout as nn::train_classifier.
  Rng rng(options.seed);
  Rng aug_rng = rng.split(0xa4a4);
  SgdMomentum opt{options.lr, options.momentum, {}};
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    if (options.decay_at_half && epoch == options.epochs / 2 && epoch > 0) opt.lr = options.lr * 0.1;
    std::vector<std::int64_t> perm(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
    rng.shuffle(std::span<std::int64_t>(perm));
    for (std::int64_t b = 0; b < n; b += options.batch_size) {
      const auto e = std::min(n, b + options.batch_size);
      std::vector<std::int64_t> rows(perm.begin() + b, perm.begin() + e);
      const auto y = labels_of(syn, rows);
      Graph g;
      nn::Binding p = nn::bind(g, model, true);
      Var x = g.constant(data::gather_rows(images, rows));
      Var x_task = x;
      const bool augmented = config.augment.enabled();
      if (augmented) {
        x_task = data::apply_augment(x, data::sample_augment(config.augment, shape[1], shape[2], aug_rng));
      }
      Var task, front_term, rear_term;
      if (!elf) {
        task = task_loss(g, model, p, x_task, y);
      } else {
        Var h;
        if (!augmented) {
          h = front.run(g, p, x, nn::Mode::Train);
          task = ops::softmax_cross_entropy(rear.run(g, p, h, nn::Mode::Train), y);
        } else {
          task = task_loss(g, model, p, x_task, y);
          // Second front pass for the feature term; running stats keep the task branch only.
          const auto saved = model.bn_stats;
          h = front.run(g, p, x, nn::Mode::Train);
          model.bn_stats = saved;
        }
        if (use_front) {
          const Shape hs(h.shape().begin() + 1, h.shape().end());
          auto target = front_target(*cache, hs, rows, config.spatial_adapt);
          if (target.student_pool > 1) h = ops::avg_pool2d(h, target.student_pool, target.student_pool);
          front_term = feature_distance(config.distance, h, target.teacher);
        }
        if (use_rear) rear_term = rear_loss(g, *cache, rear, p, rows, y, config.spatial_adapt);
      }
      Var total = elf_total_loss(config.use_task ? task : Var(), front_term, rear_term,
                                 use_front ? config.lambda_front : 0.0, use_rear ? config.lambda_rear : 0.0);
      const double tv = task.value().item();
      const double fv = use_front ? front_term.value().item() : 0.0;
      const double rv = use_rear ? rear_term.value().item() : 0.0;
      const double sv = total.value().item();
      if (!std::isfinite(sv)) {
        std::ostringstream msg;
        msg << "non-finite evaluation loss at epoch " << epoch << ", batch " << b / options.batch_size
            << ": task " << tv << ", front " << fv << ", rear " << rv;
        throw NumericError(msg.str());
      }
      run.trace.task.push_back(tv);
      run.trace.front.push_back(fv);
      run.trace.rear.push_back(rv);
      run.trace.total.push_back(sv);
      auto grads = g.backward(total);
      TensorMap gm(grads.named().begin(), grads.named().end());
      nn::add_weight_decay(gm, model.params, options.weight_decay);
      opt.step(model.params, gm);
    }
  }
  return run;
}

}  // namespace elfdd::elf
