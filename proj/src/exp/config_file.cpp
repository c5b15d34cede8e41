#include "elfdd/exp/config_file.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "elfdd/core/error.hpp"

namespace elfdd::exp {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Value parsing with the section and key in every error.
class Section {
 public:
  Section(std::string name, const pt::ptree& tree) : name_(std::move(name)), tree_(tree) {
    for (const auto& [k, v] : tree_) {
      if (!v.empty()) throw ConfigError("[" + name_ + "] " + k + ": nested keys are not supported");
      if (!keys_.insert(k).second) throw ConfigError("[" + name_ + "] " + k + " is given twice");
    }
  }

  bool has(const std::string& key) const { return keys_.count(key) > 0; }

  std::string str(const std::string& key) const {
    used_.insert(key);
    return trim(tree_.get<std::string>(pt::ptree::path_type(key, '\0')));
  }

  template <class T>
  T num(const std::string& key) const {
    const std::string s = str(key);
    std::istringstream in(s);
    T v{};
    if (!(in >> v) || !(in >> std::ws).eof()) throw bad(key, s, "a number");
    return v;
  }

  bool flag(const std::string& key) const {
    const std::string s = str(key);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw bad(key, s, "true or false");
  }

  template <class T>
  std::vector<T> num_list(const std::string& key) const {
    std::vector<T> out;
    for (const auto& item : split_list(str(key))) {
      std::istringstream in(item);
      T v{};
      if (!(in >> v) || !(in >> std::ws).eof()) throw bad(key, item, "a list of numbers");
      out.push_back(v);
    }
    return out;
  }

  // Wraps a parser that throws ConfigError so the message names the key.
  template <class F>
  auto parsed(const std::string& key, F parse) const {
    const std::string s = str(key);
    try {
      return parse(s);
    } catch (const Error& e) {
      throw ConfigError("[" + name_ + "] " + key + ": " + e.what());
    }
  }

  void check_all_used() const {
    for (const auto& k : keys_) {
      if (!used_.count(k)) throw ConfigError("[" + name_ + "] unknown key '" + k + "'");
    }
  }

 private:
  ConfigError bad(const std::string& key, const std::string& value, const std::string& what) const {
    return ConfigError("[" + name_ + "] " + key + " = '" + value + "' is not " + what);
  }

  std::string name_;
  const pt::ptree& tree_;
  std::set<std::string> keys_;
  mutable std::set<std::string> used_;
};

template <class T>
void set_if(const Section& s, const std::string& key, T& target) {
  if (s.has(key)) target = s.num<T>(key);
}

void set_flag_if(const Section& s, const std::string& key, bool& target) {
  if (s.has(key)) target = s.flag(key);
}

std::vector<double> channel_fill(std::int64_t channels, double v) {
  return std::vector<double>(static_cast<std::size_t>(channels), v);
}

nn::ModelConfig model_for(const DatasetSpec& data) {
  nn::ModelConfig m;
  m.input_shape = data.image_shape();
  m.num_classes = data.class_count();
  m.input_mean = channel_fill(m.input_shape[0], 0.5);
  m.input_std = channel_fill(m.input_shape[0], 0.25);
  return m;
}

void read_model(const Section& s, nn::ModelConfig& m) {
  if (s.has("family")) m.family = s.parsed("family", nn::parse_family);
  set_if(s, "depth", m.depth);
  set_if(s, "width", m.width);
  if (s.has("norm")) m.norm = s.parsed("norm", nn::parse_norm);
}

void read_augment(const Section& s, data::AugmentConfig& a) {
  if (s.has("augment")) {
    a.ops.clear();
    for (const auto& op : split_list(s.str("augment"))) {
      a.ops.push_back(s.parsed("augment", [&](const std::string&) { return data::parse_aug_op(op); }));
    }
  }
  if (s.has("augment_mode")) {
    const std::string m = s.str("augment_mode");
    if (m != "single" && m != "all") throw ConfigError("augment_mode must be single or all, got '" + m + "'");
    a.single = m == "single";
  }
}

// Entry-level keys shared by [train] and [entry.<id>].
struct EntryDefaults {
  elf::ElfConfig elf;
  FeatureSource source = FeatureSource::Extractor;
};

void read_entry_keys(const Section& s, EntryDefaults& d) {
  auto& e = d.elf;
  set_if(s, "epochs", e.epochs);
  set_if(s, "lr", e.lr);
  set_if(s, "batch_size", e.batch_size);
  set_if(s, "momentum", e.momentum);
  set_if(s, "weight_decay", e.weight_decay);
  set_flag_if(s, "decay_at_half", e.decay_at_half);
  read_augment(s, e.augment);
  set_if(s, "lambda_front", e.lambda_front);
  set_if(s, "lambda_rear", e.lambda_rear);
  set_flag_if(s, "use_task", e.use_task);
  if (s.has("distance")) e.distance = s.parsed("distance", elf::parse_distance);
  if (s.has("split")) e.split = s.str("split");
  set_if(s, "feature_epoch", e.feature_epoch);
  if (s.has("spatial_adapt")) e.spatial_adapt = s.parsed("spatial_adapt", elf::parse_spatial_adapt);
  if (s.has("source")) d.source = s.parsed("source", parse_feature_source);
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

}  // namespace

ExperimentConfig parse_experiment_config(std::istream& in, const fs::path& base_dir) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("experiment file: ") + e.what());
  }
  const pt::ptree empty;
  std::map<std::string, const pt::ptree*> sections;
  std::vector<std::pair<std::string, const pt::ptree*>> entries;
  for (const auto& [name, sub] : tree) {
    if (sub.empty() && !sub.data().empty()) throw ConfigError("key '" + name + "' outside any section");
    if (name.rfind("entry.", 0) == 0) {
      entries.emplace_back(name.substr(6), &sub);
    } else if (name == "experiment" || name == "data" || name == "distill" || name == "extractor" || name == "train") {
      sections[name] = &sub;
    } else {
      throw ConfigError("unknown section [" + name + "]");
    }
  }
  auto section = [&](const std::string& name) {
    auto it = sections.find(name);
    return Section(name, it == sections.end() ? empty : *it->second);
  };

  ExperimentConfig c;
  {
    const auto s = section("experiment");
    if (s.has("name")) c.name = s.str("name");
    set_if(s, "seed", c.seed);
    if (s.has("seeds")) c.seeds = s.num_list<std::uint64_t>("seeds");
    c.out_dir = s.has("out_dir") ? resolve(base_dir, s.str("out_dir")) : resolve(base_dir, "runs/" + c.name);
    set_if(s, "workers", c.workers);
    s.check_all_used();
  }
  {
    const auto s = section("data");
    const std::string kind = s.has("kind") ? s.str("kind") : "toy";
    if (kind == "toy") {
      auto& t = c.data.toy;
      set_if(s, "classes", t.class_count);
      set_if(s, "resolution", t.resolution);
      set_if(s, "channels", t.channels);
      set_if(s, "samples_per_class", t.samples_per_class);
      set_if(s, "noise", t.noise);
      set_if(s, "seed", t.seed);
      set_if(s, "test_per_class", c.data.test_per_class);
    } else if (kind == "cifar10") {
      c.data.kind = DatasetSpec::Kind::Cifar10;
      if (!s.has("train") || !s.has("test")) throw ConfigError("[data] cifar10 needs train and test");
      for (const auto& f : split_list(s.str("train"))) c.data.cifar_train.push_back(resolve(base_dir, f));
      c.data.cifar_test = resolve(base_dir, s.str("test"));
    } else {
      throw ConfigError("[data] kind must be toy or cifar10, got '" + kind + "'");
    }
    s.check_all_used();
  }
  const nn::ModelConfig base_model = model_for(c.data);
  {
    const auto s = section("distill");
    auto& d = c.distill.config;
    d.model = base_model;
    if (s.has("path")) c.distill.path = resolve(base_dir, s.str("path"));
    if (s.has("method")) d.method = s.parsed("method", distill::parse_method);
    read_model(s, d.model);
    set_if(s, "ipc", d.ipc);
    if (s.has("init")) d.init = s.parsed("init", data::parse_init_mode);
    set_if(s, "iterations", d.iterations);
    set_if(s, "lr_img", d.lr_img);
    set_if(s, "img_momentum", d.img_momentum);
    set_if(s, "real_per_class", d.real_per_class);
    set_if(s, "models_per_iteration", d.models_per_iteration);
    set_if(s, "sweeps_per_model", d.sweeps_per_model);
    set_if(s, "inner_steps", d.inner_steps);
    set_if(s, "inner_lr", d.inner_lr);
    set_if(s, "fd_scale", d.fd_scale);
    read_augment(s, d.augment);
    set_if(s, "seed", d.seed);
    s.check_all_used();
  }
  {
    const auto s = section("extractor");
    auto& x = c.extractor;
    x.model = base_model;
    read_model(s, x.model);
    if (s.has("checkpoint_epochs")) x.checkpoint_epochs = s.num_list<int>("checkpoint_epochs");
    set_if(s, "batch_size", x.train.batch_size);
    set_if(s, "lr", x.train.lr);
    set_if(s, "momentum", x.train.momentum);
    set_if(s, "weight_decay", x.train.weight_decay);
    set_flag_if(s, "decay_at_half", x.train.decay_at_half);
    s.check_all_used();
  }
  EntryDefaults defaults;
  {
    const auto s = section("train");
    read_entry_keys(s, defaults);
    s.check_all_used();
  }
  for (const auto& [id, sub] : entries) {
    const Section s("entry." + id, *sub);
    GridEntry e;
    e.id = id;
    e.model = base_model;
    read_model(s, e.model);
    EntryDefaults d = defaults;
    read_entry_keys(s, d);
    e.elf = d.elf;
    e.source = d.source;
    const std::string mode = s.has("elf") ? s.str("elf") : "false";
    s.check_all_used();
    if (mode == "both") {
      GridEntry base = e, with = e;
      base.id = id + "-base";
      with.id = id + "-elf";
      with.use_elf = true;
      c.grid.push_back(base);
      c.grid.push_back(with);
    } else if (mode == "true" || mode == "false") {
      e.use_elf = mode == "true";
      c.grid.push_back(e);
    } else {
      throw ConfigError("[entry." + id + "] elf must be true, false or both, got '" + mode + "'");
    }
  }
  return c;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open experiment file " + path.string());
  return parse_experiment_config(in, path.parent_path());
}

void apply_overrides(ExperimentConfig& config, const ElfOverrides& o) {
  for (auto& e : config.grid) {
    if (!e.use_elf) continue;
    if (o.lambda_front) e.elf.lambda_front = *o.lambda_front;
    if (o.lambda_rear) e.elf.lambda_rear = *o.lambda_rear;
    if (o.distance) e.elf.distance = elf::parse_distance(*o.distance);
    if (o.split) e.elf.split = *o.split;
    if (o.spatial_adapt) e.elf.spatial_adapt = elf::parse_spatial_adapt(*o.spatial_adapt);
    if (o.feature_epoch) e.elf.feature_epoch = *o.feature_epoch;
  }
}

ExperimentConfig toy_cross_arch_config(const fs::path& out_dir) {
  ExperimentConfig c;
  c.name = "toy-cross-arch";
  c.out_dir = out_dir;
  c.data.toy.class_count = 4;
  c.data.toy.resolution = 16;
  c.data.toy.samples_per_class = 300;
  c.data.test_per_class = 100;
  const nn::ModelConfig base = model_for(c.data);

  auto& d = c.distill.config;
  d.method = distill::Method::DM;
  d.model = base;
  d.model.width = 32;
  d.ipc = 10;
  d.iterations = 500;
  d.init = data::InitMode::RealSample;

  c.extractor.model = base;
  c.extractor.model.width = 64;
  c.extractor.checkpoint_epochs = {30};
  c.extractor.train.batch_size = 64;

  elf::ElfConfig e;
  e.epochs = 300;
  e.lr = 0.01;
  e.feature_epoch = 30;
  e.lambda_front = kToyLambdaFront;
  e.lambda_rear = 1.0;
  for (auto family : {nn::Family::MiniResNet, nn::Family::MiniVGG}) {
    GridEntry g;
    g.model = base;
    g.model.family = family;
    g.model.depth = family == nn::Family::MiniResNet ? 18 : 11;
    g.model.width = 8;
    g.model.norm = nn::Norm::BatchNorm;
    g.elf = e;
    const std::string id = family == nn::Family::MiniResNet ? "resnet18" : "vgg11";
    g.id = id + "-base";
    c.grid.push_back(g);
    g.id = id + "-elf";
    g.use_elf = true;
    c.grid.push_back(g);
  }
  return c;
}

}  // namespace elfdd::exp
