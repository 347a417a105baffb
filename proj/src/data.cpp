#include "adbn/data.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "adbn/error.hpp"

namespace adbn {

std::vector<std::string> default_class_names(std::size_t n) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n; ++i) names.push_back(fmt::format("c{}", i));
  return names;
}

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  Dataset out;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
  out.labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= size())
      raise(ErrorKind::InvalidArgument, fmt::format("subset: row {} out of range", rows[i]));
    out.features.row(static_cast<Eigen::Index>(i)) =
        features.row(static_cast<Eigen::Index>(rows[i]));
    out.labels.push_back(labels[rows[i]]);
  }
  out.class_names = class_names;
  out.provenance = provenance;
  return out;
}

void Dataset::validate() const {
  if (static_cast<std::size_t>(features.rows()) != labels.size())
    raise(ErrorKind::Dimension, fmt::format("dataset: {} feature rows but {} labels",
                                            features.rows(), labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= n_classes())
      raise(ErrorKind::InvalidArgument,
            fmt::format("dataset: label {} at row {} out of range [0, {})", labels[i], i,
                        n_classes()));
  if (features.size() > 0 && (features.minCoeff() < 0.0 || features.maxCoeff() > 1.0))
    raise(ErrorKind::InvalidArgument, "dataset: features outside [0,1]");
}

void SynthConfig::validate() const {
  if (n_classes < 2) raise(ErrorKind::Config, "synth.n_classes must be >= 2");
  if (samples_per_class == 0) raise(ErrorKind::Config, "synth.samples_per_class must be >= 1");
  if (input_dim < 4) raise(ErrorKind::Config, "synth.input_dim must be >= 4");
  if (!(active_fraction > 0.0 && active_fraction < 1.0))
    raise(ErrorKind::Config, "synth.active_fraction must lie in (0,1)");
  if (pair_a == pair_b) raise(ErrorKind::Config, "synth.confusable_pair members must differ");
  if (pair_a >= n_classes || pair_b >= n_classes)
    raise(ErrorKind::Config, "synth.confusable_pair members must be < n_classes");
  if (!(overlap >= 0.0 && overlap <= 1.0))
    raise(ErrorKind::Config, "synth.overlap must lie in [0,1]");
  if (!(disagreement_rate >= 0.0 && disagreement_rate < 1.0))
    raise(ErrorKind::Config, "synth.disagreement_rate must lie in [0,1)");
  if (!(noise >= 0.0 && noise <= 0.5)) raise(ErrorKind::Config, "synth.noise must lie in [0,0.5]");
  if (!(test_fraction >= 0.0 && test_fraction < 1.0))
    raise(ErrorKind::Config, "synth.test_fraction must lie in [0,1)");
  const auto active = static_cast<std::size_t>(std::lround(active_fraction * input_dim));
  if (active == 0 || 2 * active > input_dim)
    raise(ErrorKind::Config, "synth.active_fraction leaves no room for a distinct pair prototype");
}

SynthSplit synth_ambiguous(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const std::size_t d = cfg.input_dim;
  const auto k = static_cast<std::size_t>(std::lround(cfg.active_fraction * d));
  const auto dd = static_cast<Eigen::Index>(d);

  std::vector<std::size_t> all(d);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<std::vector<std::size_t>> active(cfg.n_classes);
  for (std::size_t c = 0; c < cfg.n_classes; ++c) {
    if (c == cfg.pair_b) continue;
    std::vector<std::size_t> perm = all;
    std::shuffle(perm.begin(), perm.end(), rng);
    active[c].assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(k));
  }
  {
    // Partner prototype: `overlap` of the first member's bits, the rest from
    // outside its support.
    const auto& a = active[cfg.pair_a];
    const auto shared = static_cast<std::size_t>(std::lround(cfg.overlap * k));
    std::vector<std::size_t> from_a = a;
    std::shuffle(from_a.begin(), from_a.end(), rng);
    std::vector<std::size_t> outside;
    for (std::size_t i = 0; i < d; ++i)
      if (std::find(a.begin(), a.end(), i) == a.end()) outside.push_back(i);
    std::shuffle(outside.begin(), outside.end(), rng);
    auto& b = active[cfg.pair_b];
    b.assign(from_a.begin(), from_a.begin() + static_cast<std::ptrdiff_t>(shared));
    b.insert(b.end(), outside.begin(), outside.begin() + static_cast<std::ptrdiff_t>(k - shared));
  }
  for (auto& s : active) std::sort(s.begin(), s.end());

  SynthSplit out;
  out.prototypes = Matrix::Zero(static_cast<Eigen::Index>(cfg.n_classes), dd);
  for (std::size_t c = 0; c < cfg.n_classes; ++c)
    for (std::size_t i : active[c]) out.prototypes(static_cast<Eigen::Index>(c),
                                                   static_cast<Eigen::Index>(i)) = 1.0;

  // Ambiguous blend of pair member x towards partner y: x's prototype plus the
  // first half of y's distinctive bits.
  auto blend = [&](std::size_t x, std::size_t y) {
    Vector v = out.prototypes.row(static_cast<Eigen::Index>(x)).transpose();
    std::vector<std::size_t> distinct;
    for (std::size_t i : active[y])
      if (v[static_cast<Eigen::Index>(i)] == 0.0) distinct.push_back(i);
    for (std::size_t t = 0; t < (distinct.size() + 1) / 2; ++t)
      v[static_cast<Eigen::Index>(distinct[t])] = 1.0;
    return v;
  };
  const Vector blend_a = blend(cfg.pair_a, cfg.pair_b);
  const Vector blend_b = blend(cfg.pair_b, cfg.pair_a);
  const auto n_disagree =
      static_cast<std::size_t>(std::lround(cfg.disagreement_rate * cfg.samples_per_class));

  const std::size_t n = cfg.n_classes * cfg.samples_per_class;
  Matrix features(static_cast<Eigen::Index>(n), dd);
  std::vector<std::size_t> labels(n), origin(n);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t c = 0; c < cfg.n_classes; ++c) {
    const bool in_pair = c == cfg.pair_a || c == cfg.pair_b;
    const std::size_t partner = c == cfg.pair_a ? cfg.pair_b : cfg.pair_a;
    std::vector<std::size_t> slots(cfg.samples_per_class);
    std::iota(slots.begin(), slots.end(), std::size_t{0});
    std::shuffle(slots.begin(), slots.end(), rng);
    std::vector<bool> disagree(cfg.samples_per_class, false);
    if (in_pair)
      for (std::size_t t = 0; t < n_disagree; ++t) disagree[slots[t]] = true;

    for (std::size_t s = 0; s < cfg.samples_per_class; ++s) {
      const std::size_t row = c * cfg.samples_per_class + s;
      const auto r = static_cast<Eigen::Index>(row);
      Vector v = disagree[s] ? (c == cfg.pair_a ? blend_a : blend_b)
                             : Vector(out.prototypes.row(static_cast<Eigen::Index>(c)).transpose());
      for (Eigen::Index i = 0; i < dd; ++i)
        if (u(rng) < cfg.noise) v[i] = 1.0 - v[i];
      features.row(r) = v.transpose();
      origin[row] = c;
      labels[row] = disagree[s] ? partner : c;
    }
  }

  // Stratified split by observed label.
  std::vector<std::size_t> train_rows, test_rows;
  for (std::size_t c = 0; c < cfg.n_classes; ++c) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < n; ++i)
      if (labels[i] == c) rows.push_back(i);
    std::shuffle(rows.begin(), rows.end(), rng);
    const auto n_test =
        static_cast<std::size_t>(std::lround(cfg.test_fraction * static_cast<double>(rows.size())));
    test_rows.insert(test_rows.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_test));
    train_rows.insert(train_rows.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_test), rows.end());
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());

  Dataset full{std::move(features), std::move(labels), default_class_names(cfg.n_classes),
               fmt::format("synth seed={} pair=({},{}) overlap={} disagreement={} noise={}",
                           cfg.seed, cfg.pair_a, cfg.pair_b, cfg.overlap, cfg.disagreement_rate,
                           cfg.noise)};
  out.train = full.subset(train_rows);
  out.test = full.subset(test_rows);
  for (std::size_t i : train_rows) out.train_origin.push_back(origin[i]);
  for (std::size_t i : test_rows) out.test_origin.push_back(origin[i]);
  return out;
}

namespace {

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(std::string s) {
  const auto ws = " \t\r\n";
  s.erase(0, s.find_first_not_of(ws));
  s.erase(s.find_last_not_of(ws) + 1);
  return s;
}

}  // namespace

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) raise(ErrorKind::Io, fmt::format("{}: cannot open", path));
  std::string line;
  if (!std::getline(in, line)) raise(ErrorKind::Format, fmt::format("{}: missing header row", path));
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  std::vector<std::string> header = split_commas(line);
  for (auto& h : header) h = trim(h);
  const auto label_it = std::find(header.begin(), header.end(), schema.label_column);
  if (label_it == header.end())
    raise(ErrorKind::Format,
          fmt::format("{}: line 1: no label column '{}'", path, schema.label_column));
  const auto label_col = static_cast<std::size_t>(label_it - header.begin());
  const std::size_t n_features = header.size() - 1;
  if (n_features == 0) raise(ErrorKind::Format, fmt::format("{}: line 1: no feature columns", path));

  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split_commas(line);
    if (cells.size() != header.size())
      raise(ErrorKind::Format, fmt::format("{}: line {}: expected {} fields, got {}", path,
                                           line_no, header.size(), cells.size()));
    std::vector<double> row;
    row.reserve(n_features);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string cell = trim(cells[c]);
      if (c == label_col) {
        std::size_t label = 0;
        const auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), label);
        if (ec != std::errc() || p != cell.data() + cell.size())
          raise(ErrorKind::Format,
                fmt::format("{}: line {}: label '{}' is not a class index", path, line_no, cell));
        if (schema.n_classes > 0 && label >= schema.n_classes)
          raise(ErrorKind::InvalidArgument,
                fmt::format("{}: line {}: label {} out of range [0, {})", path, line_no, label,
                            schema.n_classes));
        labels.push_back(label);
        continue;
      }
      char* end = nullptr;
      errno = 0;
      const double x = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size() || errno != 0)
        raise(ErrorKind::Format, fmt::format("{}: line {}: column '{}': '{}' is not a number",
                                             path, line_no, header[c], cell));
      if (!(x >= 0.0 && x <= 1.0))
        raise(ErrorKind::InvalidArgument,
              fmt::format("{}: line {}: column '{}': value {} outside [0,1]", path, line_no,
                          header[c], cell));
      row.push_back(x);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) raise(ErrorKind::Format, fmt::format("{}: no samples", path));

  Dataset ds;
  ds.features.resize(static_cast<Eigen::Index>(rows.size()),
                     static_cast<Eigen::Index>(n_features));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < n_features; ++c)
      ds.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  ds.labels = std::move(labels);
  const std::size_t k = schema.n_classes > 0
                            ? schema.n_classes
                            : *std::max_element(ds.labels.begin(), ds.labels.end()) + 1;
  ds.class_names = default_class_names(k);
  ds.provenance = fmt::format("csv {}", path);
  return ds;
}

void save_csv(const Dataset& ds, const std::string& path) {
  ds.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorKind::Io, fmt::format("{}: cannot open for writing", path));
  for (std::size_t c = 0; c < ds.n_features(); ++c) out << 'f' << c << ',';
  out << "label\n";
  for (std::size_t r = 0; r < ds.size(); ++r) {
    for (std::size_t c = 0; c < ds.n_features(); ++c)
      out << fmt::format("{}", ds.features(static_cast<Eigen::Index>(r),
                                           static_cast<Eigen::Index>(c)))
          << ',';
    out << ds.labels[r] << '\n';
  }
  if (!out) raise(ErrorKind::Io, fmt::format("{}: write failed", path));
}

namespace {

std::vector<unsigned char> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::Io, fmt::format("{}: cannot open", path));
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                        const std::string& path) {
  if (bytes.size() < offset + 4)
    raise(ErrorKind::Format, fmt::format("{}: truncated header: expected at least {} bytes, got {}",
                                         path, offset + 4, bytes.size()));
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::ostream& out, std::uint32_t x) {
  const char b[4] = {static_cast<char>(x >> 24), static_cast<char>(x >> 16),
                     static_cast<char>(x >> 8), static_cast<char>(x)};
  out.write(b, 4);
}

constexpr std::uint32_t kIdxImages = 0x00000803;
constexpr std::uint32_t kIdxLabels = 0x00000801;

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 std::size_t n_classes) {
  const auto img = read_bytes(images_path);
  const std::uint32_t magic = read_be32(img, 0, images_path);
  if (magic != kIdxImages)
    raise(ErrorKind::Format, fmt::format("{}: byte 0: bad magic 0x{:08x}, expected 0x{:08x}",
                                         images_path, magic, kIdxImages));
  const std::uint64_t n = read_be32(img, 4, images_path);
  const std::uint64_t rows = read_be32(img, 8, images_path);
  const std::uint64_t cols = read_be32(img, 12, images_path);
  const std::uint64_t expected = 16 + n * rows * cols;
  if (img.size() != expected)
    raise(ErrorKind::Format, fmt::format("{}: expected {} bytes, got {}", images_path, expected,
                                         img.size()));

  const auto lab = read_bytes(labels_path);
  const std::uint32_t lmagic = read_be32(lab, 0, labels_path);
  if (lmagic != kIdxLabels)
    raise(ErrorKind::Format, fmt::format("{}: byte 0: bad magic 0x{:08x}, expected 0x{:08x}",
                                         labels_path, lmagic, kIdxLabels));
  const std::uint64_t ln = read_be32(lab, 4, labels_path);
  if (lab.size() != 8 + ln)
    raise(ErrorKind::Format,
          fmt::format("{}: expected {} bytes, got {}", labels_path, 8 + ln, lab.size()));
  if (ln != n)
    raise(ErrorKind::Dimension,
          fmt::format("idx: {} images but {} labels ({} / {})", n, ln, images_path, labels_path));
  if (n == 0) raise(ErrorKind::Format, fmt::format("{}: no samples", images_path));

  Dataset ds;
  const std::uint64_t dim = rows * cols;
  ds.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (std::uint64_t s = 0; s < n; ++s)
    for (std::uint64_t p = 0; p < dim; ++p)
      ds.features(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(p)) =
          img[16 + s * dim + p] / 255.0;
  std::size_t max_label = 0;
  for (std::uint64_t s = 0; s < n; ++s) {
    const std::size_t label = lab[8 + s];
    if (n_classes > 0 && label >= n_classes)
      raise(ErrorKind::InvalidArgument,
            fmt::format("{}: byte {}: label {} out of range [0, {})", labels_path, 8 + s, label,
                        n_classes));
    ds.labels.push_back(label);
    max_label = std::max(max_label, label);
  }
  ds.class_names = default_class_names(n_classes > 0 ? n_classes : max_label + 1);
  ds.provenance = fmt::format("idx {} {}", images_path, labels_path);
  return ds;
}

void save_idx(const Dataset& ds, const std::string& images_path, const std::string& labels_path) {
  ds.validate();
  if (ds.n_classes() > 256) raise(ErrorKind::InvalidArgument, "save_idx: more than 256 classes");
  {
    std::ofstream out(images_path, std::ios::binary);
    if (!out) raise(ErrorKind::Io, fmt::format("{}: cannot open for writing", images_path));
    write_be32(out, kIdxImages);
    write_be32(out, static_cast<std::uint32_t>(ds.size()));
    write_be32(out, 1);
    write_be32(out, static_cast<std::uint32_t>(ds.n_features()));
    for (Eigen::Index r = 0; r < ds.features.rows(); ++r)
      for (Eigen::Index c = 0; c < ds.features.cols(); ++c)
        out.put(static_cast<char>(std::lround(ds.features(r, c) * 255.0)));
  }
  std::ofstream out(labels_path, std::ios::binary);
  if (!out) raise(ErrorKind::Io, fmt::format("{}: cannot open for writing", labels_path));
  write_be32(out, kIdxLabels);
  write_be32(out, static_cast<std::uint32_t>(ds.size()));
  for (std::size_t l : ds.labels) out.put(static_cast<char>(l));
}

}  // namespace adbn
