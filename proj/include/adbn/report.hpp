#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adbn/data.hpp"
#include "adbn/dbn.hpp"
#include "adbn/distill.hpp"
#include "adbn/rules.hpp"

namespace adbn {

// A report is a plain-text table document plus the same content as JSON.
struct Report {
  std::string name;
  std::string text;
  std::string json;
};

Report synth_report(const SynthSplit& split, const SynthConfig& cfg, std::uint64_t seed);
Report pretrain_report(const Dbn& m, std::uint64_t seed);
Report train_report(const HeadReport& head, const Evaluation& train_eval,
                    const std::vector<std::string>& class_names, std::uint64_t seed);
Report eval_report(const Evaluation& ev, const std::vector<std::string>& class_names,
                   std::uint64_t seed);
Report kl_report(const KlReport& kl, std::uint64_t seed);
Report repair_report(const RepairReport& r, const std::vector<std::string>& class_names,
                     std::uint64_t seed);
Report trace_report(const std::vector<PathTrace>& traces, const std::vector<std::size_t>& labels,
                    std::uint64_t seed);
Report rules_report(const RuleExtraction& rules, double tree_accuracy,
                    const std::vector<std::size_t>& labels, std::uint64_t seed);

}  // namespace adbn
