#pragma once

// Flat `key = value` run configuration.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "ctxnmt/seq2seq.hpp"
#include "ctxnmt/training.hpp"

namespace ctxnmt {

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};

/// Every recognised key with its default, in the order resolved configs are written.
const std::vector<ConfigKey>& config_keys();

class RunConfig {
 public:
  RunConfig();

  /// Reads `key = value` lines; `#` starts a comment. Unknown keys and
  /// malformed lines throw ConfigError naming the key and the line number.
  static RunConfig from_file(const std::filesystem::path& path);

  /// Applies one `key=value` override.
  void set(std::string_view assignment);
  void set(const std::string& key, const std::string& value);

  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  long long get_int(const std::string& key) const;
  std::uint64_t get_seed() const;
  bool has_value(const std::string& key) const { return !get(key).empty(); }

  void write(std::ostream& out) const;
  bool operator==(const RunConfig&) const = default;

 private:
  std::map<std::string, std::string> values_;
};

/// Model shape from the config; vocabulary sizes are supplied by the caller.
ModelConfig model_config(const RunConfig& cfg, Index source_vocab, Index target_vocab);
TrainConfig train_config(const RunConfig& cfg);

/// Serializes the model-shape part of a ModelConfig as `key = value` lines
/// (used inside checkpoints) and parses it back.
std::string model_config_text(const ModelConfig& cfg);
ModelConfig parse_model_config_text(const std::string& text);

}  // namespace ctxnmt
