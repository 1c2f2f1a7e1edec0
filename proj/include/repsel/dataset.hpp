#pragma once

// Labeled embedding sets: validation, the EMB1 binary format, CSV fixtures,
// per-class train/test splitting and a synthetic generator with multi-view
// classes and label noise.

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "repsel/common.hpp"

namespace repsel {

enum class Split : std::uint8_t { train = 0, test = 1, unassigned = 2 };

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::test: return "test";
    case Split::unassigned: return "unassigned";
  }
  return "unassigned";
}

struct EmbeddingRecord {
  std::uint64_t id = 0;
  std::vector<float> vector;
  std::uint32_t label = 0;
  Split split = Split::unassigned;

  std::span<const float> view() const { return vector; }
  bool operator==(const EmbeddingRecord&) const = default;
};

/// A validated, immutable collection of records sharing one dimension and
/// one label vocabulary.
class EmbeddingSet {
 public:
  EmbeddingSet() = default;

  EmbeddingSet(std::uint32_t dimension, std::vector<std::string> vocabulary,
               std::vector<EmbeddingRecord> records)
      : dimension_(dimension), vocabulary_(std::move(vocabulary)), records_(std::move(records)) {
    if (dimension_ == 0) throw ValidationError("dimension must be at least 1");
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(records_.size());
    for (std::size_t i = 0; i < records_.size(); ++i) {
      const auto& r = records_[i];
      const std::string where = "record " + std::to_string(i) + " (id " + std::to_string(r.id) + ")";
      if (r.vector.size() != dimension_)
        throw ValidationError(where + ": dimension " + std::to_string(r.vector.size()) +
                              " != " + std::to_string(dimension_));
      if (!all_finite(r.vector)) throw ValidationError(where + ": non-finite vector entry");
      if (r.label >= vocabulary_.size()) throw ValidationError(where + ": label index out of range");
      if (!seen.insert(r.id).second) throw ValidationError(where + ": duplicate id");
    }
  }

  std::uint32_t dimension() const { return dimension_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const std::vector<EmbeddingRecord>& records() const { return records_; }
  const EmbeddingRecord& operator[](std::size_t i) const { return records_[i]; }
  const std::vector<std::string>& vocabulary() const { return vocabulary_; }
  std::size_t class_count() const { return vocabulary_.size(); }

  /// Positions of each label's records, in record order; indexed by label.
  std::vector<std::vector<std::size_t>> members_by_class() const {
    std::vector<std::vector<std::size_t>> out(vocabulary_.size());
    for (std::size_t i = 0; i < records_.size(); ++i) out[records_[i].label].push_back(i);
    return out;
  }

  /// Number of labels with at least one record.
  std::size_t populated_class_count() const {
    std::size_t n = 0;
    for (const auto& m : members_by_class()) n += m.empty() ? 0 : 1;
    return n;
  }

  /// New set with the records at `positions`, in the given order.
  EmbeddingSet select(std::span<const std::size_t> positions) const {
    std::vector<EmbeddingRecord> out;
    out.reserve(positions.size());
    for (std::size_t p : positions) out.push_back(records_.at(p));
    return EmbeddingSet(dimension_, vocabulary_, std::move(out));
  }

  bool operator==(const EmbeddingSet&) const = default;

 private:
  std::uint32_t dimension_ = 1;
  std::vector<std::string> vocabulary_;
  std::vector<EmbeddingRecord> records_;
};

// ---------------------------------------------------------------------------
// EMB1 binary format (little endian):
//   "EMB1", u32 d, u64 n, u32 V, V x {u16 len, bytes},
//   n x {u64 id, u32 label, u8 split, d x f32}
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
void put_le(std::string& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>(u & 0xFF));
    if constexpr (sizeof(T) > 1) u >>= 8;
  }
}

inline void put_f32(std::string& out, float value) {
  std::uint32_t bits;
  std::memcpy(&bits, &value, sizeof bits);
  put_le(out, bits);
}

/// Bounds-checked little-endian cursor over a byte buffer.
class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  template <typename T>
  T get(const char* what) {
    if (remaining() < sizeof(T)) throw FormatError(std::string("truncated ") + what, pos_);
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      u |= static_cast<std::make_unsigned_t<T>>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }

  float get_f32(const char* what) {
    const auto bits = get<std::uint32_t>(what);
    float f;
    std::memcpy(&f, &bits, sizeof f);
    return f;
  }

  std::string_view take(std::size_t n, const char* what) {
    if (remaining() < n) throw FormatError(std::string("truncated ") + what, pos_);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed: " + path);
  return std::move(ss).str();
}

inline void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace detail

inline constexpr std::string_view kEmbeddingMagic = "EMB1";

/// Size in bytes of one record on disk.
inline std::size_t record_stride(std::uint32_t dimension) { return 8 + 4 + 1 + 4 * std::size_t{dimension}; }

inline std::string serialize(const EmbeddingSet& set) {
  std::string out;
  out.reserve(32 + set.size() * record_stride(set.dimension()));
  out.append(kEmbeddingMagic);
  detail::put_le(out, set.dimension());
  detail::put_le(out, static_cast<std::uint64_t>(set.size()));
  detail::put_le(out, static_cast<std::uint32_t>(set.vocabulary().size()));
  for (const auto& name : set.vocabulary()) {
    if (name.size() > 0xFFFF) throw ValidationError("label name longer than 65535 bytes");
    detail::put_le(out, static_cast<std::uint16_t>(name.size()));
    out.append(name);
  }
  for (const auto& r : set.records()) {
    detail::put_le(out, r.id);
    detail::put_le(out, r.label);
    detail::put_le(out, static_cast<std::uint8_t>(r.split));
    for (float v : r.vector) detail::put_f32(out, v);
  }
  return out;
}

/// Parses EMB1 bytes. Every error carries the byte offset of the field or
/// record at fault.
inline EmbeddingSet parse_embeddings(std::string_view bytes) {
  detail::Reader rd(bytes);
  if (bytes.size() < 4 || bytes.substr(0, 4) != kEmbeddingMagic) throw FormatError("bad magic, expected EMB1", 0);
  rd.take(4, "magic");
  const auto dim_offset = rd.offset();
  const auto dim = rd.get<std::uint32_t>("header");
  if (dim == 0) throw FormatError("dimension must be at least 1", dim_offset);
  const auto count = rd.get<std::uint64_t>("header");
  const auto vocab_len = rd.get<std::uint32_t>("header");
  std::vector<std::string> vocab;
  vocab.reserve(std::min<std::size_t>(vocab_len, rd.remaining() / 2));
  for (std::uint32_t v = 0; v < vocab_len; ++v) {
    const auto len = rd.get<std::uint16_t>("label name length");
    vocab.emplace_back(rd.take(len, "label name"));
  }

  const std::size_t stride = record_stride(dim);
  const std::size_t body_start = rd.offset();
  if (count > rd.remaining() / stride || rd.remaining() != count * stride) {
    // Locate the first record that cannot be read whole at the declared d.
    const std::size_t whole = rd.remaining() / stride;
    const std::size_t bad = static_cast<std::size_t>(std::min<std::uint64_t>(whole, count));
    throw FormatError("record " + std::to_string(bad) + ": dimension mismatch or truncated record (expected " +
                          std::to_string(count) + " records of dimension " + std::to_string(dim) + ")",
                      body_start + bad * stride);
  }

  std::vector<EmbeddingRecord> records;
  records.reserve(count);
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::size_t at = rd.offset();
    EmbeddingRecord r;
    r.id = rd.get<std::uint64_t>("record");
    r.label = rd.get<std::uint32_t>("record");
    const auto tag = rd.get<std::uint8_t>("record");
    if (tag > 2) throw FormatError("record " + std::to_string(i) + ": invalid split tag", at);
    r.split = static_cast<Split>(tag);
    r.vector.resize(dim);
    for (auto& x : r.vector) x = rd.get_f32("record");
    if (r.label >= vocab.size()) throw FormatError("record " + std::to_string(i) + ": label index out of range", at);
    if (!all_finite(r.vector)) throw FormatError("record " + std::to_string(i) + ": non-finite vector entry", at);
    if (!seen.insert(r.id).second)
      throw FormatError("record " + std::to_string(i) + ": duplicate id " + std::to_string(r.id), at);
    records.push_back(std::move(r));
  }
  return EmbeddingSet(dim, std::move(vocab), std::move(records));
}

inline EmbeddingSet load_embeddings(const std::string& path) { return parse_embeddings(detail::read_file(path)); }

inline void save_embeddings(const EmbeddingSet& set, const std::string& path) {
  detail::write_file(path, serialize(set));
}

/// Content digest of a set (hash of its EMB1 bytes).
inline std::uint64_t digest(const EmbeddingSet& set) { return fnv1a64(serialize(set)); }

// ---------------------------------------------------------------------------
// CSV fixtures: id,label_name,split,v0..v{d-1}; an optional header row whose
// first field is "id". Errors report 1-based line numbers.
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::string format_float(float v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
  return buf;
}

}  // namespace detail

inline Split parse_split(std::string_view s) {
  if (s == "train" || s == "0") return Split::train;
  if (s == "test" || s == "1") return Split::test;
  if (s == "unassigned" || s == "2" || s.empty()) return Split::unassigned;
  throw ValidationError("unknown split tag '" + std::string(s) + "'");
}

inline EmbeddingSet parse_embeddings_csv(std::string_view text) {
  std::vector<std::string> vocab;
  std::unordered_map<std::string, std::uint32_t> label_index;
  std::vector<EmbeddingRecord> records;
  std::unordered_set<std::uint64_t> seen;
  std::size_t dim = 0;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const auto line = detail::trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto fields = detail::split_fields(line);
    if (records.empty() && dim == 0 && detail::trim(fields[0]) == "id") continue;
    if (fields.size() < 4) throw FormatError("expected id,label,split and at least one value", line_no);
    if (dim == 0) dim = fields.size() - 3;
    if (fields.size() - 3 != dim)
      throw FormatError("ragged row: " + std::to_string(fields.size() - 3) + " values, expected " +
                            std::to_string(dim),
                        line_no);
    EmbeddingRecord r;
    const auto id_field = detail::trim(fields[0]);
    auto [p, ec] = std::from_chars(id_field.data(), id_field.data() + id_field.size(), r.id);
    if (ec != std::errc() || p != id_field.data() + id_field.size()) throw FormatError("bad id", line_no);
    if (!seen.insert(r.id).second) throw FormatError("duplicate id " + std::to_string(r.id), line_no);
    const std::string name(detail::trim(fields[1]));
    auto it = label_index.find(name);
    if (it == label_index.end()) {
      it = label_index.emplace(name, static_cast<std::uint32_t>(vocab.size())).first;
      vocab.push_back(name);
    }
    r.label = it->second;
    try {
      r.split = parse_split(detail::trim(fields[2]));
    } catch (const ValidationError& e) {
      throw FormatError(e.what(), line_no);
    }
    r.vector.resize(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      const auto f = detail::trim(fields[3 + j]);
      auto [q, ec2] = std::from_chars(f.data(), f.data() + f.size(), r.vector[j]);
      if (ec2 != std::errc() || q != f.data() + f.size() || !std::isfinite(r.vector[j]))
        throw FormatError("bad value in column " + std::to_string(3 + j), line_no);
    }
    records.push_back(std::move(r));
  }
  if (dim == 0) throw FormatError("no records; the dimension cannot be inferred", line_no);
  return EmbeddingSet(static_cast<std::uint32_t>(dim), std::move(vocab), std::move(records));
}

inline EmbeddingSet load_embeddings_csv(const std::string& path) {
  return parse_embeddings_csv(detail::read_file(path));
}

/// CSV text with a header row; floats use 9 significant digits, which
/// round-trips f32 exactly.
inline std::string to_csv(const EmbeddingSet& set) {
  std::string out = "id,label_name,split";
  for (std::uint32_t j = 0; j < set.dimension(); ++j) out += ",v" + std::to_string(j);
  out += '\n';
  for (const auto& r : set.records()) {
    out += std::to_string(r.id);
    out += ',';
    out += set.vocabulary()[r.label];
    out += ',';
    out += to_string(r.split);
    for (float v : r.vector) {
      out += ',';
      out += detail::format_float(v);
    }
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

struct TrainTest {
  EmbeddingSet train;
  EmbeddingSet test;
};

/// Number of a class's records that go to test: round-half-up of
/// fraction * n, clamped to [1, n-1]; classes with fewer than two records
/// contribute none.
inline std::size_t test_count_for_class(std::size_t n, double test_fraction) {
  if (n < 2) return 0;
  const auto t = static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(n) + 0.5));
  return std::clamp<std::size_t>(t, 1, n - 1);
}

inline TrainTest split_per_class(const EmbeddingSet& set, double test_fraction, std::uint64_t seed) {
  if (set.empty()) throw ValidationError("cannot split an empty set");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ValidationError("test_fraction must be in (0, 1)");
  Rng rng(seed);
  std::vector<bool> to_test(set.size(), false);
  for (const auto& members : set.members_by_class()) {
    const std::size_t t = test_count_for_class(members.size(), test_fraction);
    for (std::size_t pick : sample_without_replacement(members.size(), t, rng)) to_test[members[pick]] = true;
  }
  std::vector<EmbeddingRecord> train, test;
  for (std::size_t i = 0; i < set.size(); ++i) {
    EmbeddingRecord r = set[i];
    r.split = to_test[i] ? Split::test : Split::train;
    (to_test[i] ? test : train).push_back(std::move(r));
  }
  return {EmbeddingSet(set.dimension(), set.vocabulary(), std::move(train)),
          EmbeddingSet(set.dimension(), set.vocabulary(), std::move(test))};
}

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

struct SyntheticConfig {
  std::uint32_t class_count = 10;
  std::uint32_t views_per_class = 3;
  std::uint32_t points_per_view = 20;
  std::uint32_t dimension = 16;
  double view_spread = 0.1;
  double class_spread = 1.0;
  double noise_fraction = 0.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (class_count == 0 || views_per_class == 0 || points_per_view == 0 || dimension == 0)
      throw ValidationError("synthetic counts and dimension must be at least 1");
    if (!(view_spread > 0.0) || !(class_spread > 0.0)) throw ValidationError("spreads must be positive");
    if (!(noise_fraction >= 0.0 && noise_fraction <= 1.0)) throw ValidationError("noise_fraction must be in [0, 1]");
  }
};

struct SyntheticData {
  EmbeddingSet set;
  /// Ids of records whose vector was placed in another class's region.
  /// For tests and diagnostics only; selection code never reads it.
  std::vector<std::uint64_t> noise_ids;
  /// Global view index (class * views_per_class + view) each record was
  /// drawn from, before any noise relocation.
  std::vector<std::uint32_t> view_of;
};

/// Class centers ~ N(0, (2 * class_spread)^2 I); view centers ~ class center
/// + N(0, class_spread^2 I); points ~ view center + N(0, view_spread^2 I).
/// Noise records keep their label but are redrawn around a random view of a
/// uniformly chosen other class. Record ids are 0..n-1 in generation order.
inline SyntheticData generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const std::size_t d = cfg.dimension;
  const std::size_t views = std::size_t{cfg.class_count} * cfg.views_per_class;

  auto gaussian_around = [&](std::span<const double> center, double spread) {
    std::vector<double> v(d);
    for (std::size_t j = 0; j < d; ++j) v[j] = center[j] + spread * standard_normal(rng);
    return v;
  };

  const std::vector<double> origin(d, 0.0);
  std::vector<std::vector<double>> view_centers;
  view_centers.reserve(views);
  for (std::uint32_t c = 0; c < cfg.class_count; ++c) {
    const auto class_center = gaussian_around(origin, 2.0 * cfg.class_spread);
    for (std::uint32_t v = 0; v < cfg.views_per_class; ++v)
      view_centers.push_back(gaussian_around(class_center, cfg.class_spread));
  }

  const std::size_t total = views * cfg.points_per_view;
  const auto noise_count = static_cast<std::size_t>(std::llround(cfg.noise_fraction * static_cast<double>(total)));
  std::vector<bool> is_noise(total, false);
  for (std::size_t p : sample_without_replacement(total, noise_count, rng)) is_noise[p] = true;

  std::vector<std::string> vocab;
  for (std::uint32_t c = 0; c < cfg.class_count; ++c) {
    char name[32];
    std::snprintf(name, sizeof name, "class_%03u", c);
    vocab.emplace_back(name);
  }

  SyntheticData out;
  std::vector<EmbeddingRecord> records;
  records.reserve(total);
  out.view_of.reserve(total);
  std::size_t id = 0;
  for (std::size_t view = 0; view < views; ++view) {
    const auto label = static_cast<std::uint32_t>(view / cfg.views_per_class);
    for (std::uint32_t p = 0; p < cfg.points_per_view; ++p, ++id) {
      std::size_t source_view = view;
      if (is_noise[id]) {
        std::size_t other = label;
        if (cfg.class_count > 1) {
          other = uniform_index(rng, cfg.class_count - 1);
          if (other >= label) ++other;
        }
        source_view = other * cfg.views_per_class + uniform_index(rng, cfg.views_per_class);
        out.noise_ids.push_back(id);
      }
      const auto v = gaussian_around(view_centers[source_view], cfg.view_spread);
      EmbeddingRecord r;
      r.id = id;
      r.label = label;
      r.vector.assign(v.begin(), v.end());
      records.push_back(std::move(r));
      out.view_of.push_back(static_cast<std::uint32_t>(view));
    }
  }
  out.set = EmbeddingSet(cfg.dimension, std::move(vocab), std::move(records));
  return out;
}

/// Noise sidecar: one id per line.
inline void save_noise_sidecar(std::span<const std::uint64_t> ids, const std::string& path) {
  std::string text;
  for (auto id : ids) text += std::to_string(id) + '\n';
  detail::write_file(path, text);
}

}  // namespace repsel
