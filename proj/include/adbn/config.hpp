#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adbn/adaptive.hpp"
#include "adbn/data.hpp"
#include "adbn/dbn.hpp"
#include "adbn/distill.hpp"
#include "adbn/rbm.hpp"
#include "adbn/rules.hpp"

namespace adbn {

struct Paths {
  std::string train = "train.csv";
  std::string train_labels;  // non-empty: train is an IDX image file
  std::string test = "test.csv";
  std::string test_labels;
  std::string model = "model.adbn";
  std::string child;  // optional second model for `kl`; repair writes its child here
  std::string repaired = "repaired.adbn";
  std::string out = "reports";
};

struct RunConfig {
  // Every stochastic stage draws from this seed; the per-stage seeds inside
  // the nested configs are overwritten by apply_seed().
  std::uint64_t seed = 7;
  std::size_t workers = 1;
  SynthConfig synth;
  CdConfig cd;
  StructureConfig structure;
  HeadConfig head;
  RepairConfig repair;
  std::vector<std::size_t> target_classes{6, 5};
  TreeConfig rules;
  std::string label_column = "label";
  std::size_t trace_limit = 20;
  Paths paths;

  void apply_seed();
  void validate() const;
};

/// Parses a JSON document over the defaults. Unknown keys and mistyped values
/// raise ErrorKind::Config naming the key path.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Applies `key.path=value` overrides in order. The value is read as JSON when
/// it parses, otherwise as a string.
void apply_overrides(RunConfig& cfg, const std::vector<std::string>& assignments);

/// Full configuration as indented JSON, defaults included.
std::string dump_config(const RunConfig& cfg);

/// One value by dotted key: strings verbatim, anything else as compact JSON.
std::string config_value(const RunConfig& cfg, const std::string& key);

}  // namespace adbn
