#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "adbn/types.hpp"

namespace adbn {

struct Dataset {
  Matrix features;  // one row per sample, entries in [0,1]
  std::vector<std::size_t> labels;
  std::vector<std::string> class_names;
  std::string provenance;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t n_classes() const noexcept { return class_names.size(); }
  std::size_t n_features() const noexcept { return static_cast<std::size_t>(features.cols()); }

  Dataset subset(const std::vector<std::size_t>& rows) const;
  void validate() const;
};

/// Synthetic corpus with one confusable class pair.
///
/// Each class has a binary prototype with `active_fraction * input_dim` bits
/// set; the pair's second prototype reuses `overlap` of the first one's bits.
/// A `disagreement_rate` fraction of each pair class's samples is generated as
/// an ambiguous blend (own prototype plus half of the partner's distinctive
/// bits) and carries the partner's label, which is how a second annotator
/// would read such an input. Every bit is then flipped with probability
/// `noise`.
struct SynthConfig {
  std::size_t n_classes = 8;
  std::size_t samples_per_class = 500;
  std::size_t input_dim = 64;
  double active_fraction = 0.25;
  std::size_t pair_a = 6;
  std::size_t pair_b = 5;
  double overlap = 0.6;
  double disagreement_rate = 0.2;
  double noise = 0.02;
  double test_fraction = 0.2;
  std::uint64_t seed = 7;

  void validate() const;
};

struct SynthSplit {
  Dataset train;
  Dataset test;
  // Generating prototype per sample, parallel to the datasets' rows.
  std::vector<std::size_t> train_origin;
  std::vector<std::size_t> test_origin;
  Matrix prototypes;  // n_classes x input_dim
};

SynthSplit synth_ambiguous(const SynthConfig& cfg);

struct CsvSchema {
  std::string label_column = "label";
  std::size_t n_classes = 0;  // 0: one more than the largest label seen
};

Dataset load_csv(const std::string& path, const CsvSchema& schema = {});
void save_csv(const Dataset& ds, const std::string& path);

/// IDX pair: images (magic 0x00000803, n x rows x cols unsigned bytes, scaled
/// by 1/255) and labels (magic 0x00000801).
Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 std::size_t n_classes = 0);
/// Writes features rounded to bytes as n x 1 x n_features images.
void save_idx(const Dataset& ds, const std::string& images_path, const std::string& labels_path);

std::vector<std::string> default_class_names(std::size_t n);

}  // namespace adbn
