#include "adbn/config.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "adbn/error.hpp"

namespace adbn {

using Json = nlohmann::ordered_json;

namespace {

Json head_json(const HeadConfig& h) {
  return {{"epochs", h.epochs}, {"learning_rate", h.learning_rate}};
}

Json to_tree(const RunConfig& c) {
  const auto& r = c.repair;
  return {
      {"seed", c.seed},
      {"workers", c.workers},
      {"paths",
       {{"train", c.paths.train},
        {"train_labels", c.paths.train_labels},
        {"test", c.paths.test},
        {"test_labels", c.paths.test_labels},
        {"model", c.paths.model},
        {"child", c.paths.child},
        {"repaired", c.paths.repaired},
        {"out", c.paths.out}}},
      {"data", {{"label_column", c.label_column}}},
      {"synth",
       {{"n_classes", c.synth.n_classes},
        {"samples_per_class", c.synth.samples_per_class},
        {"input_dim", c.synth.input_dim},
        {"active_fraction", c.synth.active_fraction},
        {"confusable_pair", {c.synth.pair_a, c.synth.pair_b}},
        {"overlap", c.synth.overlap},
        {"disagreement_rate", c.synth.disagreement_rate},
        {"noise", c.synth.noise},
        {"test_fraction", c.synth.test_fraction}}},
      {"cd",
       {{"k", c.cd.k},
        {"learning_rate", c.cd.learning_rate},
        {"batch_size", c.cd.batch_size},
        {"epochs", c.cd.epochs}}},
      {"structure",
       {{"initial_hidden", c.structure.initial_hidden},
        {"max_hidden", c.structure.max_hidden},
        {"max_layers", c.structure.max_layers},
        {"window", c.structure.window},
        {"warmup_epochs", c.structure.warmup_epochs},
        {"theta_gen", c.structure.theta_gen},
        {"theta_ann", c.structure.theta_ann},
        {"theta_wd_layer", c.structure.theta_wd_layer},
        {"theta_energy_layer", c.structure.theta_energy_layer},
        {"inherit_noise_sigma", c.structure.inherit_noise_sigma}}},
      {"head", head_json(c.head)},
      {"repair",
       {{"target_classes", c.target_classes},
        {"theta_kl", r.theta_kl},
        {"upper_layers", r.upper_layer_count},
        {"child",
         {{"training_set", child_training_set_name(r.child.training_set)},
          {"max_rounds", r.child.max_rounds},
          {"cd_epochs", r.child.cd_epochs},
          {"cd_learning_rate", r.child.cd_learning_rate},
          {"cd_batch_size", r.child.cd_batch_size},
          {"head", head_json(r.child.head)}}},
        {"retrain",
         {{"sigma", r.retrain.sigma},
          {"cd_epochs", r.retrain.cd_epochs},
          {"cd_learning_rate", r.retrain.cd_learning_rate},
          {"cd_batch_size", r.retrain.cd_batch_size},
          {"head", head_json(r.retrain.head)}}}}},
      {"fine_tune",
       {{"theta_t", r.fine_tune.theta_t},
        {"theta_f", r.fine_tune.theta_f},
        {"w_correct", r.fine_tune.w_correct},
        {"w_wrong", r.fine_tune.w_wrong},
        {"activation_threshold", r.fine_tune.activation_threshold},
        {"exclusive", r.fine_tune.exclusive}}},
      {"rules", {{"max_depth", c.rules.max_depth}, {"min_samples_leaf", c.rules.min_samples_leaf}}},
      {"trace", {{"limit", c.trace_limit}}},
  };
}

std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

const char* kind_of(const Json& v) {
  if (v.is_boolean()) return "a boolean";
  if (v.is_number_unsigned()) return "a non-negative integer";
  if (v.is_number()) return "a number";
  if (v.is_string()) return "a string";
  if (v.is_array()) return "an array";
  if (v.is_object()) return "an object";
  return "null";
}

// Copies `src` into `dst`, refusing keys that `dst` does not already have and
// values whose type differs from the default's.
void merge(Json& dst, const Json& src, const std::string& path) {
  if (!src.is_object())
    raise(ErrorKind::Config,
          fmt::format("{}: expected an object, got {}", path.empty() ? "<root>" : path,
                      kind_of(src)));
  for (auto it = src.begin(); it != src.end(); ++it) {
    const std::string key = join(path, it.key());
    auto slot = dst.find(it.key());
    if (slot == dst.end()) raise(ErrorKind::Config, fmt::format("{}: unknown key", key));
    const Json& v = it.value();
    bool ok = false;
    if (slot->is_object()) {
      merge(*slot, v, key);
      continue;
    }
    if (slot->is_boolean()) ok = v.is_boolean();
    else if (slot->is_number_unsigned()) ok = v.is_number_unsigned();
    else if (slot->is_number()) ok = v.is_number();
    else if (slot->is_string()) ok = v.is_string();
    else if (slot->is_array()) ok = v.is_array();
    if (!ok)
      raise(ErrorKind::Config,
            fmt::format("{}: expected {}, got {}", key, kind_of(*slot), kind_of(v)));
    *slot = v;
  }
}

std::vector<std::size_t> index_list(const Json& v, const std::string& key) {
  std::vector<std::size_t> out;
  for (const Json& e : v) {
    if (!e.is_number_unsigned())
      raise(ErrorKind::Config, fmt::format("{}: entries must be non-negative integers", key));
    out.push_back(e.get<std::size_t>());
  }
  return out;
}

HeadConfig read_head(const Json& j) {
  return {j.at("epochs").get<std::size_t>(), j.at("learning_rate").get<double>()};
}

ChildTrainingSet read_training_set(const std::string& s) {
  for (auto t : {ChildTrainingSet::Misclassified, ChildTrainingSet::Correct,
                 ChildTrainingSet::AllTargets})
    if (s == child_training_set_name(t)) return t;
  raise(ErrorKind::Config,
        fmt::format("repair.child.training_set: '{}' is not one of misclassified, correct, "
                    "all_targets",
                    s));
}

RunConfig from_tree(const Json& t) {
  RunConfig c;
  c.seed = t.at("seed").get<std::uint64_t>();
  c.workers = t.at("workers").get<std::size_t>();

  const Json& p = t.at("paths");
  c.paths.train = p.at("train").get<std::string>();
  c.paths.train_labels = p.at("train_labels").get<std::string>();
  c.paths.test = p.at("test").get<std::string>();
  c.paths.test_labels = p.at("test_labels").get<std::string>();
  c.paths.model = p.at("model").get<std::string>();
  c.paths.child = p.at("child").get<std::string>();
  c.paths.repaired = p.at("repaired").get<std::string>();
  c.paths.out = p.at("out").get<std::string>();
  c.label_column = t.at("data").at("label_column").get<std::string>();

  const Json& s = t.at("synth");
  c.synth.n_classes = s.at("n_classes").get<std::size_t>();
  c.synth.samples_per_class = s.at("samples_per_class").get<std::size_t>();
  c.synth.input_dim = s.at("input_dim").get<std::size_t>();
  c.synth.active_fraction = s.at("active_fraction").get<double>();
  const auto pair = index_list(s.at("confusable_pair"), "synth.confusable_pair");
  if (pair.size() != 2)
    raise(ErrorKind::Config, "synth.confusable_pair: expected exactly two class indices");
  c.synth.pair_a = pair[0];
  c.synth.pair_b = pair[1];
  c.synth.overlap = s.at("overlap").get<double>();
  c.synth.disagreement_rate = s.at("disagreement_rate").get<double>();
  c.synth.noise = s.at("noise").get<double>();
  c.synth.test_fraction = s.at("test_fraction").get<double>();

  const Json& cd = t.at("cd");
  c.cd.k = cd.at("k").get<std::size_t>();
  c.cd.learning_rate = cd.at("learning_rate").get<double>();
  c.cd.batch_size = cd.at("batch_size").get<std::size_t>();
  c.cd.epochs = cd.at("epochs").get<std::size_t>();

  const Json& st = t.at("structure");
  c.structure.initial_hidden = st.at("initial_hidden").get<std::size_t>();
  c.structure.max_hidden = st.at("max_hidden").get<std::size_t>();
  c.structure.max_layers = st.at("max_layers").get<std::size_t>();
  c.structure.window = st.at("window").get<std::size_t>();
  c.structure.warmup_epochs = st.at("warmup_epochs").get<std::size_t>();
  c.structure.theta_gen = st.at("theta_gen").get<double>();
  c.structure.theta_ann = st.at("theta_ann").get<double>();
  c.structure.theta_wd_layer = st.at("theta_wd_layer").get<double>();
  c.structure.theta_energy_layer = st.at("theta_energy_layer").get<double>();
  c.structure.inherit_noise_sigma = st.at("inherit_noise_sigma").get<double>();

  c.head = read_head(t.at("head"));

  const Json& r = t.at("repair");
  c.target_classes = index_list(r.at("target_classes"), "repair.target_classes");
  c.repair.theta_kl = r.at("theta_kl").get<double>();
  c.repair.upper_layer_count = r.at("upper_layers").get<std::size_t>();
  const Json& ch = r.at("child");
  c.repair.child.training_set = read_training_set(ch.at("training_set").get<std::string>());
  c.repair.child.max_rounds = ch.at("max_rounds").get<std::size_t>();
  c.repair.child.cd_epochs = ch.at("cd_epochs").get<std::size_t>();
  c.repair.child.cd_learning_rate = ch.at("cd_learning_rate").get<double>();
  c.repair.child.cd_batch_size = ch.at("cd_batch_size").get<std::size_t>();
  c.repair.child.head = read_head(ch.at("head"));
  const Json& rt = r.at("retrain");
  c.repair.retrain.sigma = rt.at("sigma").get<double>();
  c.repair.retrain.cd_epochs = rt.at("cd_epochs").get<std::size_t>();
  c.repair.retrain.cd_learning_rate = rt.at("cd_learning_rate").get<double>();
  c.repair.retrain.cd_batch_size = rt.at("cd_batch_size").get<std::size_t>();
  c.repair.retrain.head = read_head(rt.at("head"));

  const Json& ft = t.at("fine_tune");
  c.repair.fine_tune.theta_t = ft.at("theta_t").get<double>();
  c.repair.fine_tune.theta_f = ft.at("theta_f").get<double>();
  c.repair.fine_tune.w_correct = ft.at("w_correct").get<double>();
  c.repair.fine_tune.w_wrong = ft.at("w_wrong").get<double>();
  c.repair.fine_tune.activation_threshold = ft.at("activation_threshold").get<double>();
  c.repair.fine_tune.exclusive = ft.at("exclusive").get<bool>();

  c.rules.max_depth = t.at("rules").at("max_depth").get<std::size_t>();
  c.rules.min_samples_leaf = t.at("rules").at("min_samples_leaf").get<std::size_t>();
  c.trace_limit = t.at("trace").at("limit").get<std::size_t>();

  c.apply_seed();
  c.validate();
  return c;
}

Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    raise(ErrorKind::Config, fmt::format("{}: {}", what, e.what()));
  }
}

}  // namespace

void RunConfig::apply_seed() {
  synth.seed = seed;
  cd.seed = seed;
  repair.child.seed = derive_seed(seed, 13);
  repair.retrain.seed = derive_seed(seed, 11);
}

void RunConfig::validate() const {
  if (workers == 0) raise(ErrorKind::Config, "workers: must be >= 1");
  synth.validate();
  cd.validate();
  structure.validate();
  head.validate();
  repair.validate();
  rules.validate();
  if (target_classes.empty())
    raise(ErrorKind::Config, "repair.target_classes: at least one class required");
  for (std::size_t i = 0; i < target_classes.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (target_classes[i] == target_classes[j])
        raise(ErrorKind::Config,
              fmt::format("repair.target_classes: class {} listed twice", target_classes[i]));
  if (label_column.empty()) raise(ErrorKind::Config, "data.label_column: must not be empty");
}

RunConfig parse_config(const std::string& text) {
  Json tree = to_tree(RunConfig{});
  merge(tree, parse_json(text, "config"), "");
  return from_tree(tree);
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::Io, fmt::format("{}: cannot open config", path));
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const Error& e) {
    raise(e.kind(), fmt::format("{}: {}", path, e.what()));
  }
}

void apply_overrides(RunConfig& cfg, const std::vector<std::string>& assignments) {
  if (assignments.empty()) return;
  Json tree = to_tree(cfg);
  for (const std::string& a : assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos || eq == 0)
      raise(ErrorKind::Config, fmt::format("override '{}': expected key.path=value", a));
    const std::string key = a.substr(0, eq);
    const std::string raw = a.substr(eq + 1);
    Json value = Json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;

    Json patch = value;
    std::vector<std::string> parts;
    std::stringstream ks(key);
    for (std::string part; std::getline(ks, part, '.');) {
      if (part.empty()) raise(ErrorKind::Config, fmt::format("override '{}': empty key segment", a));
      parts.push_back(part);
    }
    for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = Json{{*it, patch}};
    merge(tree, patch, "");
  }
  cfg = from_tree(tree);
}

std::string dump_config(const RunConfig& cfg) { return to_tree(cfg).dump(2) + "\n"; }

std::string config_value(const RunConfig& cfg, const std::string& key) {
  const Json tree = to_tree(cfg);
  const Json* node = &tree;
  std::stringstream ks(key);
  for (std::string part; std::getline(ks, part, '.');) {
    if (!node->is_object() || !node->contains(part))
      raise(ErrorKind::Config, fmt::format("{}: unknown key", key));
    node = &node->at(part);
  }
  return node->is_string() ? node->get<std::string>() : node->dump();
}

}  // namespace adbn
