#include "adbn/archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <fmt/format.h>
#include <zlib.h>

#include "adbn/error.hpp"

namespace adbn {

namespace {

class Writer {
 public:
  void u8(std::uint8_t x) { buf_.push_back(x); }
  void u32(std::uint32_t x) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<unsigned char>(x >> (8 * i)));
  }
  void u64(std::uint64_t x) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<unsigned char>(x >> (8 * i)));
  }
  void f64(double x) { u64(std::bit_cast<std::uint64_t>(x)); }
  void bytes(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
  }
  void doubles(const double* p, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) f64(p[i]);
  }
  std::vector<unsigned char>& buffer() { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const unsigned char> b) : b_(b) {}

  std::uint8_t u8() {
    need(1);
    return b_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t x = 0;
    for (int i = 0; i < 4; ++i) x |= std::uint32_t{b_[pos_++]} << (8 * i);
    return x;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x |= std::uint64_t{b_[pos_++]} << (8 * i);
    return x;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string bytes() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void doubles(double* p, Eigen::Index n) {
    need(static_cast<std::size_t>(n) * 8);
    for (Eigen::Index i = 0; i < n; ++i) p[i] = f64();
  }
  std::size_t pos() const noexcept { return pos_; }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n)
      raise(ErrorKind::Format, fmt::format("archive: truncated at byte {} (need {} more, {} left)",
                                           pos_, n, b_.size() - pos_));
  }

  std::span<const unsigned char> b_;
  std::size_t pos_ = 0;
};

std::uint32_t checksum(const unsigned char* p, std::size_t n) {
  return static_cast<std::uint32_t>(::crc32(0L, p, static_cast<uInt>(n)));
}

constexpr unsigned char kMagic[4] = {'A', 'D', 'B', 'N'};
constexpr std::uint32_t kMaxDim = 1U << 24;

}  // namespace

std::vector<unsigned char> encode_archive(const Dbn& model, const ArchiveMetadata& metadata) {
  model.check_invariants();
  Writer w;
  for (unsigned char c : kMagic) w.u8(c);
  w.u32(kArchiveVersion);
  w.u32(static_cast<std::uint32_t>(model.n_layers()));
  w.u32(static_cast<std::uint32_t>(model.n_classes()));
  for (const Rbm& l : model.layers()) {
    w.u32(static_cast<std::uint32_t>(l.n_visible()));
    w.u32(static_cast<std::uint32_t>(l.n_hidden()));
    w.doubles(l.weights().data(), l.weights().size());
    w.doubles(l.visible_bias().data(), l.visible_bias().size());
    w.doubles(l.hidden_bias().data(), l.hidden_bias().size());
  }
  w.doubles(model.head().weights.data(), model.head().weights.size());
  w.doubles(model.head().bias.data(), model.head().bias.size());
  const auto& events = model.events().events();
  w.u32(static_cast<std::uint32_t>(events.size()));
  for (const StructureEvent& e : events) {
    w.u64(e.epoch);
    w.u32(static_cast<std::uint32_t>(e.kind));
    w.u32(static_cast<std::uint32_t>(e.layer_index));
    w.u8(e.neuron_index ? 1 : 0);
    w.u64(e.neuron_index.value_or(0));
    w.bytes(e.detail);
  }
  w.u32(static_cast<std::uint32_t>(metadata.size()));
  for (const auto& [k, v] : metadata) {
    w.bytes(k);
    w.bytes(v);
  }
  auto& buf = w.buffer();
  w.u32(checksum(buf.data(), buf.size()));
  return std::move(buf);
}

ModelArchive decode_archive(std::span<const unsigned char> bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    raise(ErrorKind::Format, "archive: missing ADBN magic header");
  const std::size_t body = bytes.size() - 4;
  Reader trailer(bytes.subspan(body));
  const std::uint32_t stored = trailer.u32();
  const std::uint32_t actual = checksum(bytes.data(), body);

  Reader r(bytes.first(body));
  for (int i = 0; i < 4; ++i) r.u8();
  const std::uint32_t version = r.u32();
  if (version > kArchiveVersion)
    raise(ErrorKind::Format, fmt::format("archive: format version {} is newer than supported {}",
                                         version, kArchiveVersion));
  if (version == 0) raise(ErrorKind::Format, "archive: format version 0 is invalid");
  if (stored != actual)
    raise(ErrorKind::Format, fmt::format("archive: checksum mismatch (stored 0x{:08x}, computed "
                                         "0x{:08x})",
                                         stored, actual));

  const std::uint32_t n_layers = r.u32();
  const std::uint32_t n_classes = r.u32();
  if (n_layers == 0 || n_layers > 1024 || n_classes == 0 || n_classes > kMaxDim)
    raise(ErrorKind::Format,
          fmt::format("archive: implausible header ({} layers, {} classes)", n_layers, n_classes));
  std::vector<Rbm> layers;
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    const std::uint32_t nv = r.u32();
    const std::uint32_t nh = r.u32();
    if (nv == 0 || nh == 0 || nv > kMaxDim || nh > kMaxDim)
      raise(ErrorKind::Format, fmt::format("archive: layer {} has invalid shape {}x{}", l, nv, nh));
    Matrix w(nv, nh);
    Vector b(nv), c(nh);
    r.doubles(w.data(), w.size());
    r.doubles(b.data(), b.size());
    r.doubles(c.data(), c.size());
    layers.push_back(Rbm::from_parameters(std::move(w), std::move(b), std::move(c)));
  }
  SoftmaxHead head{Matrix(static_cast<Eigen::Index>(layers.back().n_hidden()), n_classes),
                   Vector(static_cast<Eigen::Index>(n_classes))};
  r.doubles(head.weights.data(), head.weights.size());
  r.doubles(head.bias.data(), head.bias.size());

  EventLog events;
  const std::uint32_t n_events = r.u32();
  for (std::uint32_t i = 0; i < n_events; ++i) {
    StructureEvent e;
    e.epoch = r.u64();
    const std::uint32_t kind = r.u32();
    if (kind > static_cast<std::uint32_t>(EventKind::NeuronGrafted))
      raise(ErrorKind::Format, fmt::format("archive: event {} has unknown kind {}", i, kind));
    e.kind = static_cast<EventKind>(kind);
    e.layer_index = r.u32();
    const bool has_neuron = r.u8() != 0;
    const std::uint64_t neuron = r.u64();
    if (has_neuron) e.neuron_index = neuron;
    e.detail = r.bytes();
    events.append(std::move(e));
  }
  ArchiveMetadata metadata;
  const std::uint32_t n_meta = r.u32();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = r.bytes();
    metadata[std::move(k)] = r.bytes();
  }
  if (r.pos() != body)
    raise(ErrorKind::Format,
          fmt::format("archive: {} unexpected bytes before the checksum", body - r.pos()));
  return {Dbn(std::move(layers), std::move(head), std::move(events)), std::move(metadata)};
}

void save_archive(const std::string& path, const Dbn& model, const ArchiveMetadata& metadata) {
  const auto bytes = encode_archive(model, metadata);
  std::ofstream out(path, std::ios::binary);
  if (!out) raise(ErrorKind::Io, fmt::format("{}: cannot open for writing", path));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) raise(ErrorKind::Io, fmt::format("{}: write failed", path));
}

ModelArchive load_archive(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorKind::Io, fmt::format("{}: cannot open", path));
  const std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in),
                                         std::istreambuf_iterator<char>()};
  try {
    return decode_archive(bytes);
  } catch (const Error& e) {
    raise(e.kind(), fmt::format("{}: {}", path, e.what()));
  }
}

}  // namespace adbn
