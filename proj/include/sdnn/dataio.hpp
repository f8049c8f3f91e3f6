#pragma once

// Challenge file formats and MNIST ingestion.
//
// Text formats are tab-separated triples, 1-based, sorted by (row, col), one
// record per LF-terminated line, no header:
//   input TSV:  <image-id>\t<pixel-id>\t1
//   layer TSV:  <src-neuron>\t<dst-neuron>\t<weight>
//   categories: <image-id>            (strictly increasing)
// In memory everything is 0-based; the shift happens only here.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "sdnn/error.hpp"
#include "sdnn/kv.hpp"
#include "sdnn/radixnet.hpp"
#include "sdnn/sparse_matrix.hpp"

namespace sdnn {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;
inline constexpr int kDefaultThreshold = 128;

struct ImageSet {
  std::size_t n_images = 0;
  std::size_t side = 0;
  std::vector<std::uint8_t> pixels;

  std::span<const std::uint8_t> image(std::size_t i) const {
    return std::span<const std::uint8_t>(pixels).subspan(i * side * side, side * side);
  }
};

namespace detail {

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("error reading " + path);
  return buf.str();
}

inline void spill(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  out.flush();
  if (!out) throw IoError("error writing " + path);
}

inline std::uint32_t read_be32(std::string_view bytes, std::size_t offset,
                               const std::string& path) {
  if (bytes.size() < offset + 4) {
    throw ParseError(path + ": truncated header at byte offset " +
                     std::to_string(offset));
  }
  std::uint32_t v = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    v = (v << 8) | static_cast<std::uint8_t>(bytes[offset + i]);
  }
  return v;
}

inline void check_magic(std::uint32_t got, std::uint32_t want, const std::string& path) {
  if (got != want) {
    std::ostringstream os;
    os << path << ": bad magic 0x" << std::hex << got << " at byte offset 0 (expected 0x"
       << want << ")";
    throw ParseError(os.str());
  }
}

inline void check_payload(std::size_t have, std::size_t header, std::size_t want,
                          const std::string& path) {
  if (have < header + want) {
    throw ParseError(path + ": truncated payload at byte offset " +
                     std::to_string(have) + " (header promises " +
                     std::to_string(want) + " bytes from offset " +
                     std::to_string(header) + ")");
  }
  if (have > header + want) {
    throw ParseError(path + ": count mismatch, " +
                     std::to_string(have - header - want) +
                     " trailing bytes at byte offset " + std::to_string(header + want));
  }
}

inline void append_be32(std::string& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<char>((v >> s) & 0xff));
}

/// Splits a text file into lines, calling fn(line, line_no). A missing final
/// newline is tolerated on read.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    fn(line, line_no);
  }
}

[[noreturn]] inline void fail_line(const std::string& path, std::size_t line_no,
                                   const std::string& what) {
  throw ParseError(path + ":" + std::to_string(line_no) + ": " + what);
}

template <typename N>
N parse_number(std::string_view field, const std::string& path, std::size_t line_no,
               const char* what) {
  N v{};
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc{} || ptr != end || field.empty()) {
    fail_line(path, line_no, std::string("malformed ") + what + " '" +
                                 std::string(field) + "'");
  }
  return v;
}

template <typename T>
void append_number(std::string& out, T v) {
  std::array<char, 64> buf;
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  out.append(buf.data(), ptr);
}

template <typename T>
struct ParsedTriple {
  std::uint64_t row;
  std::uint64_t col;
  T value;
};

/// Parses one "row\tcol\tvalue" line and checks ordering and ranges.
template <typename T>
ParsedTriple<T> parse_triple(std::string_view line, std::size_t line_no,
                             const std::string& path, std::uint64_t n_cols,
                             std::uint64_t& prev_row, std::uint64_t& prev_col) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  const auto t1 = line.find('\t');
  const auto t2 = t1 == std::string_view::npos ? t1 : line.find('\t', t1 + 1);
  if (t2 == std::string_view::npos || line.find('\t', t2 + 1) != std::string_view::npos) {
    fail_line(path, line_no, "expected three tab-separated fields");
  }
  ParsedTriple<T> t;
  t.row = parse_number<std::uint64_t>(line.substr(0, t1), path, line_no, "row");
  t.col = parse_number<std::uint64_t>(line.substr(t1 + 1, t2 - t1 - 1), path, line_no, "column");
  t.value = parse_number<T>(line.substr(t2 + 1), path, line_no, "value");
  if (t.row < 1) fail_line(path, line_no, "row index must be >= 1");
  if (t.col < 1 || t.col > n_cols) {
    fail_line(path, line_no, "column " + std::to_string(t.col) + " outside [1, " +
                                 std::to_string(n_cols) + "]");
  }
  if (t.row < prev_row || (t.row == prev_row && t.col <= prev_col)) {
    fail_line(path, line_no, t.row == prev_row && t.col == prev_col
                                 ? "duplicate entry"
                                 : "entries not sorted by (row, col)");
  }
  if (!std::isfinite(t.value)) fail_line(path, line_no, "value is not finite");
  if (t.value == T{0}) fail_line(path, line_no, "explicit zero value");
  prev_row = t.row;
  prev_col = t.col;
  return t;
}

template <typename T>
SparseMatrix<T> read_triples(const std::string& path, std::size_t n_rows_hint,
                             std::size_t n_rows_max, std::size_t n_cols,
                             bool values_must_be_one) {
  const std::string text = slurp(path);
  std::vector<std::size_t> row_of;
  std::vector<Index> cols;
  std::vector<T> vals;
  std::uint64_t prev_row = 0, prev_col = 0;
  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    auto t = parse_triple<T>(line, line_no, path, n_cols, prev_row, prev_col);
    if (n_rows_max != 0 && t.row > n_rows_max) {
      fail_line(path, line_no, "row " + std::to_string(t.row) + " outside [1, " +
                                   std::to_string(n_rows_max) + "]");
    }
    if (values_must_be_one && t.value != T{1}) {
      fail_line(path, line_no, "input values must be 1");
    }
    row_of.push_back(static_cast<std::size_t>(t.row - 1));
    cols.push_back(static_cast<Index>(t.col - 1));
    vals.push_back(t.value);
  });
  std::size_t n_rows = std::max(n_rows_hint, row_of.empty() ? 0 : row_of.back() + 1);
  std::vector<std::size_t> offsets(n_rows + 1, 0);
  for (std::size_t r : row_of) ++offsets[r + 1];
  for (std::size_t i = 0; i < n_rows; ++i) offsets[i + 1] += offsets[i];
  return SparseMatrix<T>(trusted, n_rows, n_cols, std::move(offsets), std::move(cols),
                         std::move(vals));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// MNIST IDX

inline ImageSet read_idx_images(const std::string& path) {
  const std::string bytes = detail::slurp(path);
  detail::check_magic(detail::read_be32(bytes, 0, path), kIdxImageMagic, path);
  const std::size_t count = detail::read_be32(bytes, 4, path);
  const std::size_t rows = detail::read_be32(bytes, 8, path);
  const std::size_t cols = detail::read_be32(bytes, 12, path);
  if (rows != cols) {
    throw ParseError(path + ": non-square images (" + std::to_string(rows) + "x" +
                     std::to_string(cols) + ") at byte offset 8");
  }
  detail::check_payload(bytes.size(), 16, count * rows * cols, path);
  ImageSet set;
  set.n_images = count;
  set.side = rows;
  set.pixels.assign(bytes.begin() + 16, bytes.end());
  return set;
}

inline std::vector<std::uint8_t> read_idx_labels(const std::string& path) {
  const std::string bytes = detail::slurp(path);
  detail::check_magic(detail::read_be32(bytes, 0, path), kIdxLabelMagic, path);
  const std::size_t count = detail::read_be32(bytes, 4, path);
  detail::check_payload(bytes.size(), 8, count, path);
  return std::vector<std::uint8_t>(bytes.begin() + 8, bytes.end());
}

inline void write_idx_images(const ImageSet& set, const std::string& path) {
  if (set.pixels.size() != set.n_images * set.side * set.side) {
    throw ShapeError("write_idx_images: pixel buffer does not match n_images x side^2");
  }
  std::string out;
  detail::append_be32(out, kIdxImageMagic);
  detail::append_be32(out, static_cast<std::uint32_t>(set.n_images));
  detail::append_be32(out, static_cast<std::uint32_t>(set.side));
  detail::append_be32(out, static_cast<std::uint32_t>(set.side));
  out.append(set.pixels.begin(), set.pixels.end());
  detail::spill(path, out);
}

inline void write_idx_labels(std::span<const std::uint8_t> labels, const std::string& path) {
  std::string out;
  detail::append_be32(out, kIdxLabelMagic);
  detail::append_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.append(labels.begin(), labels.end());
  detail::spill(path, out);
}

// ---------------------------------------------------------------------------
// Preprocessing: resize, threshold, flatten

/// Widths used by the challenge inputs (32x32 .. 256x256).
inline bool is_standard_side(std::size_t side) {
  return side == 32 || side == 64 || side == 128 || side == 256;
}

/// Bilinear resample of a square grayscale image with pixel centers at
/// half-integer positions and edge clamping.
inline std::vector<double> resize_bilinear(std::span<const std::uint8_t> img,
                                           std::size_t side, std::size_t target_side) {
  if (img.size() != side * side || side == 0) {
    throw ShapeError("resize_bilinear: image has " + std::to_string(img.size()) +
                     " pixels, expected " + std::to_string(side * side));
  }
  const double scale = static_cast<double>(side) / static_cast<double>(target_side);
  const double max_coord = static_cast<double>(side - 1);

  struct Tap {
    std::size_t lo, hi;
    double frac;
  };
  std::vector<Tap> taps(target_side);
  for (std::size_t x = 0; x < target_side; ++x) {
    double s = (static_cast<double>(x) + 0.5) * scale - 0.5;
    s = std::clamp(s, 0.0, max_coord);
    const auto lo = static_cast<std::size_t>(std::floor(s));
    taps[x] = {lo, std::min(lo + 1, side - 1), s - static_cast<double>(lo)};
  }

  std::vector<double> out(target_side * target_side);
  for (std::size_t y = 0; y < target_side; ++y) {
    const Tap& ty = taps[y];
    for (std::size_t x = 0; x < target_side; ++x) {
      const Tap& tx = taps[x];
      const double top = (1.0 - tx.frac) * img[ty.lo * side + tx.lo] +
                         tx.frac * img[ty.lo * side + tx.hi];
      const double bottom = (1.0 - tx.frac) * img[ty.hi * side + tx.lo] +
                            tx.frac * img[ty.hi * side + tx.hi];
      out[y * target_side + x] = (1.0 - ty.frac) * top + ty.frac * bottom;
    }
  }
  return out;
}

/// Resizes to target_side^2, sets pixels with interpolated value >= threshold
/// to 1, flattens row-major and returns the 1-based indices of the 1 pixels.
inline std::vector<Index> preprocess_image(std::span<const std::uint8_t> img,
                                           std::size_t side, std::size_t target_side,
                                           int threshold = kDefaultThreshold) {
  if (threshold < 1 || threshold > 255) {
    throw InvariantError("threshold: must be in [1, 255], got " + std::to_string(threshold));
  }
  if (target_side == 0) throw InvariantError("target_side: must be positive");
  const auto resized = resize_bilinear(img, side, target_side);
  std::vector<Index> on;
  for (std::size_t p = 0; p < resized.size(); ++p) {
    if (resized[p] >= threshold) on.push_back(static_cast<Index>(p + 1));
  }
  return on;
}

// ---------------------------------------------------------------------------
// Input TSV

/// images[i] holds the 1-based pixel ids of image i+1, strictly increasing.
inline void write_input_tsv(const std::vector<std::vector<Index>>& images,
                            const std::string& path) {
  std::string out;
  for (std::size_t i = 0; i < images.size(); ++i) {
    Index prev = 0;
    for (Index p : images[i]) {
      if (p <= prev) {
        throw InvariantError("write_input_tsv: pixel ids of image " + std::to_string(i + 1) +
                             " are not strictly increasing 1-based ids");
      }
      prev = p;
      detail::append_number(out, i + 1);
      out += '\t';
      detail::append_number(out, p);
      out += "\t1\n";
    }
  }
  detail::spill(path, out);
}

/// Writes a binary activation batch. Every stored value must be 1.
template <typename T>
void write_input_tsv(const SparseMatrix<T>& y0, const std::string& path) {
  std::string out;
  for (std::size_t i = 0; i < y0.n_rows(); ++i) {
    auto cols = y0.row_cols(i);
    auto vals = y0.row_values(i);
    for (std::size_t p = 0; p < cols.size(); ++p) {
      if (vals[p] != T{1}) {
        throw InvariantError("write_input_tsv: input batches must be binary");
      }
      detail::append_number(out, i + 1);
      out += '\t';
      detail::append_number(out, cols[p] + 1);
      out += "\t1\n";
    }
  }
  detail::spill(path, out);
}

/// Reads an input batch over n_neurons columns. The row count is the larger
/// of n_rows_hint and the highest image id present.
template <typename T = float>
SparseMatrix<T> read_input_tsv(const std::string& path, std::size_t n_neurons,
                               std::size_t n_rows_hint = 0) {
  return detail::read_triples<T>(path, n_rows_hint, 0, n_neurons, true);
}

/// Uniform random binary batch: each of count x n_neurons cells is 1 with
/// probability `density`. Deterministic for a given seed.
template <typename T = float>
SparseMatrix<T> synthetic_inputs(std::size_t count, std::size_t n_neurons, double density,
                                 std::uint64_t seed) {
  if (!(density >= 0.0 && density <= 1.0)) {
    throw InvariantError("inputs: synthetic density must be in [0, 1]");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::size_t> offsets(count + 1, 0);
  std::vector<Index> cols;
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = 0; j < n_neurons; ++j) {
      if (u(rng) < density) cols.push_back(static_cast<Index>(j));
    }
    offsets[i + 1] = cols.size();
  }
  std::vector<T> vals(cols.size(), T{1});
  return SparseMatrix<T>(trusted, count, n_neurons, std::move(offsets), std::move(cols),
                         std::move(vals));
}

// ---------------------------------------------------------------------------
// Layer TSV

/// Weights are written in shortest round-trip form.
template <typename T>
void write_layer_tsv(const SparseMatrix<T>& w, const std::string& path) {
  std::string out;
  out.reserve(w.nnz() * 20);
  for (std::size_t i = 0; i < w.n_rows(); ++i) {
    auto cols = w.row_cols(i);
    auto vals = w.row_values(i);
    for (std::size_t p = 0; p < cols.size(); ++p) {
      detail::append_number(out, i + 1);
      out += '\t';
      detail::append_number(out, cols[p] + 1);
      out += '\t';
      detail::append_number(out, vals[p]);
      out += '\n';
    }
  }
  detail::spill(path, out);
}

/// Reads an n_neurons x n_neurons layer.
template <typename T = float>
SparseMatrix<T> read_layer_tsv(const std::string& path, std::size_t n_neurons) {
  return detail::read_triples<T>(path, n_neurons, n_neurons, n_neurons, false);
}

// ---------------------------------------------------------------------------
// Categories

inline void write_categories(const std::vector<std::size_t>& cats, const std::string& path) {
  std::string out;
  std::size_t prev = 0;
  for (std::size_t c : cats) {
    if (c <= prev) {
      throw InvariantError("write_categories: ids must be strictly increasing and >= 1");
    }
    prev = c;
    detail::append_number(out, c);
    out += '\n';
  }
  detail::spill(path, out);
}

inline std::vector<std::size_t> read_categories(const std::string& path) {
  const std::string text = detail::slurp(path);
  std::vector<std::size_t> cats;
  detail::for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto c = detail::parse_number<std::size_t>(line, path, line_no, "category");
    if (c < 1) detail::fail_line(path, line_no, "category ids are 1-based");
    if (!cats.empty() && c <= cats.back()) {
      detail::fail_line(path, line_no, "categories not strictly increasing");
    }
    cats.push_back(c);
  });
  return cats;
}

// ---------------------------------------------------------------------------
// Network directories: one layer TSV per layer plus a key=value manifest.

inline constexpr const char* kManifestName = "network.manifest";

inline std::string layer_file_name(std::size_t n_neurons, std::size_t layer) {
  return "n" + std::to_string(n_neurons) + "-l" + std::to_string(layer + 1) + ".tsv";
}

inline KeyValues network_manifest(const NetworkSpec& spec) {
  KeyValues kv;
  std::string w, b;
  detail::append_number(w, spec.weight_value);
  detail::append_number(b, spec.bias_value);
  kv["neurons"] = std::to_string(spec.width());
  kv["layers"] = std::to_string(spec.n_layers);
  kv["radices"] = format_radices(spec.radices);
  kv["kron_width"] = std::to_string(spec.kron_width);
  kv["weight_value"] = w;
  kv["bias_value"] = b;
  std::uint64_t nc = 0;
  for (std::size_t l = 0; l < spec.n_layers; ++l) nc += spec.fan_in(l) * spec.width();
  kv["connections"] = std::to_string(nc);
  return kv;
}

template <typename T>
void write_network(const LayeredNetwork<T>& net, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    write_layer_tsv(net.layers[l], (dir / layer_file_name(net.width(), l)).string());
  }
  detail::spill((dir / kManifestName).string(), format_key_values(network_manifest(net.spec)));
}

inline std::vector<std::size_t> parse_radices(std::string_view text) {
  std::vector<std::size_t> out;
  while (!text.empty()) {
    const auto comma = text.find(',');
    auto field = detail::trim(text.substr(0, comma));
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty()) {
      throw InvariantError("radices: malformed entry '" + std::string(field) + "'");
    }
    out.push_back(v);
    text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
  }
  return out;
}

/// Loads a directory written by write_network. The manifest's bias_value is
/// broadcast into every layer's bias vector.
template <typename T = float>
LayeredNetwork<T> read_network(const std::filesystem::path& dir) {
  const auto kv = read_key_values((dir / kManifestName).string());
  auto field = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw ParseError((dir / kManifestName).string() + ": missing " + key);
    return it->second;
  };
  NetworkSpec spec;
  spec.radices = parse_radices(field("radices"));
  spec.n_layers = std::stoull(field("layers"));
  spec.kron_width = std::stoull(field("kron_width"));
  spec.weight_value = std::stod(field("weight_value"));
  spec.bias_value = std::stod(field("bias_value"));
  spec.validate();
  const std::size_t n = spec.width();
  if (std::stoull(field("neurons")) != n) {
    throw ParseError((dir / kManifestName).string() + ": neurons disagrees with radices x kron_width");
  }
  LayeredNetwork<T> net;
  net.spec = spec;
  const BiasVector<T> bias(n, static_cast<T>(spec.bias_value));
  for (std::size_t l = 0; l < spec.n_layers; ++l) {
    net.layers.push_back(read_layer_tsv<T>((dir / layer_file_name(n, l)).string(), n));
    net.biases.push_back(bias);
  }
  return net;
}

}  // namespace sdnn
