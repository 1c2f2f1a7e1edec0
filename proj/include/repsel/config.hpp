#pragma once

// Sweep configuration files: flat `key = value` lines, `#` comments,
// values are numbers, booleans, quoted or bare strings, or `[a, b, ...]`
// arrays of those. See README for the schema.

#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "repsel/common.hpp"
#include "repsel/dataset.hpp"
#include "repsel/eval.hpp"

namespace repsel {

struct ConfigValue {
  std::vector<std::string> items;
  bool is_array = false;
  std::size_t line = 0;
};

class ConfigDocument {
 public:
  static ConfigDocument parse(std::string_view text) {
    ConfigDocument doc;
    std::size_t pos = 0, line_no = 0;
    while (pos < text.size()) {
      auto eol = text.find('\n', pos);
      if (eol == std::string_view::npos) eol = text.size();
      std::string_view line = text.substr(pos, eol - pos);
      pos = eol + 1;
      ++line_no;
      line = strip_comment(line);
      line = detail::trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) throw FormatError("expected key = value", line_no);
      const std::string key(detail::trim(line.substr(0, eq)));
      const auto raw = detail::trim(line.substr(eq + 1));
      if (key.empty()) throw FormatError("empty key", line_no);
      if (doc.values_.contains(key)) throw FormatError("duplicate key '" + key + "'", line_no);
      ConfigValue v;
      v.line = line_no;
      if (!raw.empty() && raw.front() == '[') {
        if (raw.back() != ']') throw FormatError("unterminated array for '" + key + "'", line_no);
        v.is_array = true;
        const auto inner = detail::trim(raw.substr(1, raw.size() - 2));
        if (!inner.empty())
          for (auto item : detail::split_fields(inner)) v.items.push_back(unquote(detail::trim(item), line_no));
      } else {
        if (raw.empty()) throw FormatError("missing value for '" + key + "'", line_no);
        v.items.push_back(unquote(raw, line_no));
      }
      doc.values_.emplace(key, std::move(v));
    }
    return doc;
  }

  bool has(const std::string& key) const { return values_.contains(key); }
  const std::map<std::string, ConfigValue>& values() const { return values_; }

  void require_known(const std::set<std::string>& known) const {
    for (const auto& [key, v] : values_)
      if (!known.contains(key)) throw FormatError("unknown key '" + key + "'", v.line);
  }

  std::string get_string(const std::string& key, std::string fallback = {}) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second.is_array) throw FormatError("'" + key + "' must be a single value", it->second.line);
    return it->second.items.front();
  }

  template <typename T>
  T get_number(const std::string& key, T fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second.is_array) throw FormatError("'" + key + "' must be a single value", it->second.line);
    return to_number<T>(it->second.items.front(), key, it->second.line);
  }

  bool get_bool(const std::string& key, bool fallback) const {
    const auto s = get_string(key, fallback ? "true" : "false");
    if (s == "true") return true;
    if (s == "false") return false;
    throw FormatError("'" + key + "' must be true or false", values_.at(key).line);
  }

  template <typename T>
  std::vector<T> get_numbers(const std::string& key, std::vector<T> fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::vector<T> out;
    for (const auto& item : it->second.items) out.push_back(to_number<T>(item, key, it->second.line));
    return out;
  }

  std::vector<std::string> get_strings(const std::string& key, std::vector<std::string> fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return it->second.items;
  }

 private:
  static std::string_view strip_comment(std::string_view line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
  }

  static std::string unquote(std::string_view s, std::size_t line) {
    if (!s.empty() && s.front() == '"') {
      if (s.size() < 2 || s.back() != '"') throw FormatError("unterminated string", line);
      return std::string(s.substr(1, s.size() - 2));
    }
    return std::string(s);
  }

  template <typename T>
  static T to_number(const std::string& s, const std::string& key, std::size_t line) {
    T value{};
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || p != s.data() + s.size())
      throw FormatError("'" + key + "' expects a number, got '" + s + "'", line);
    return value;
  }

  std::map<std::string, ConfigValue> values_;
};

/// Everything a `sweep` run needs: inputs, output directory and the grid.
struct PipelineConfig {
  /// Either train + test, or input + test_fraction (split with split_seed).
  std::string train;
  std::string test;
  std::string input;
  double test_fraction = 0.0;
  std::uint64_t split_seed = 0;
  std::string out_dir;
  SweepSpec sweep;
};

inline const std::set<std::string>& pipeline_config_keys() {
  static const std::set<std::string> keys{
      "train", "test", "input", "test_fraction", "split_seed", "out", "methods", "fractions", "neighbors",
      "thresholds", "components", "seeds", "seed", "repetitions", "ks", "balanced", "min_keep_per_class",
      "min_cluster_size", "max_iters", "probe_epochs", "probe_learning_rate", "probe_weight_decay", "jobs"};
  return keys;
}

inline PipelineConfig parse_pipeline_config(std::string_view text) {
  const auto doc = ConfigDocument::parse(text);
  doc.require_known(pipeline_config_keys());
  PipelineConfig c;
  c.train = doc.get_string("train");
  c.test = doc.get_string("test");
  c.input = doc.get_string("input");
  c.test_fraction = doc.get_number<double>("test_fraction", 0.0);
  c.out_dir = doc.get_string("out");

  const bool have_pair = !c.train.empty() && !c.test.empty();
  const bool have_input = !c.input.empty();
  if (have_pair == have_input) throw ValidationError("config needs either train and test, or input");
  if (have_input) {
    if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0))
      throw ValidationError("config with input needs test_fraction in (0, 1)");
    if (!doc.has("split_seed")) throw ValidationError("config with input needs an explicit split_seed");
    c.split_seed = doc.get_number<std::uint64_t>("split_seed", 0);
  }
  if (!doc.has("seed") && !doc.has("seeds")) throw ValidationError("config needs an explicit seed or seeds");

  auto& s = c.sweep;
  s.methods = doc.get_strings("methods", s.methods);
  s.fractions = doc.get_numbers<double>("fractions", s.fractions);
  s.cscore_neighbors = doc.get_numbers<std::uint32_t>("neighbors", s.cscore_neighbors);
  s.thresholds = doc.get_numbers<double>("thresholds", s.thresholds);
  s.components = doc.get_numbers<std::uint32_t>("components", s.components);
  s.seeds = doc.get_numbers<std::uint64_t>("seeds", {});
  s.base_seed = doc.get_number<std::uint64_t>("seed", 0);
  s.repetitions = doc.get_number<std::uint32_t>("repetitions", 1);
  s.ks = doc.get_numbers<std::size_t>("ks", s.ks);
  s.balanced = doc.get_bool("balanced", s.balanced);
  s.min_keep_per_class = doc.get_number<std::uint32_t>("min_keep_per_class", s.min_keep_per_class);
  s.min_cluster_size = doc.get_number<std::uint32_t>("min_cluster_size", s.min_cluster_size);
  s.max_iters = doc.get_number<std::uint32_t>("max_iters", s.max_iters);
  s.probe.epochs = doc.get_number<std::uint32_t>("probe_epochs", s.probe.epochs);
  s.probe.learning_rate = doc.get_number<double>("probe_learning_rate", s.probe.learning_rate);
  s.probe.weight_decay = doc.get_number<double>("probe_weight_decay", s.probe.weight_decay);
  s.jobs = doc.get_number<unsigned>("jobs", 1);
  s.validate();
  return c;
}

inline PipelineConfig load_pipeline_config(const std::string& path) {
  return parse_pipeline_config(detail::read_file(path));
}

}  // namespace repsel
