#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace otfwi {

/// Flat `key = value` document. Grammar in docs/config.md.
class ConfigDoc {
 public:
  static ConfigDoc parse(const std::string& text, const std::string& origin = "<string>");
  static ConfigDoc load(const std::filesystem::path& path);

  /// `key=value` from the command line; later calls win.
  void set_override(const std::string& assignment);
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> get(const std::string& key) const;
  const std::map<std::string, std::string>& values() const noexcept { return values_; }

  /// One `key = value` line per entry, sorted by key.
  std::string to_string() const;

 private:
  std::map<std::string, std::string> values_;
};

/// Typed reads that collect problems instead of throwing; `consumed` tracks
/// keys so unknown ones can be reported.
class ConfigReader {
 public:
  explicit ConfigReader(const ConfigDoc& doc) : doc_(doc) {}

  double real(const std::string& key, double fallback);
  int integer(const std::string& key, int fallback);
  std::uint64_t u64(const std::string& key, std::uint64_t fallback);
  bool boolean(const std::string& key, bool fallback);
  std::string text(const std::string& key, const std::string& fallback);
  std::vector<double> reals(const std::string& key, const std::vector<double>& fallback);
  /// Value must be one of `choices`.
  std::string choice(const std::string& key, const std::string& fallback, const std::vector<std::string>& choices);

  void problem(const std::string& p) { problems_.push_back(p); }
  /// Adds one problem per key in the document that was never read.
  void check_unknown();
  /// Throws ConfigError listing all problems, if any.
  void finish();

 private:
  std::optional<std::string> take(const std::string& key);
  const ConfigDoc& doc_;
  std::vector<std::string> seen_;
  std::vector<std::string> problems_;
};

}  // namespace otfwi
