#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cagp/common.hpp"
#include "cagp/kernel.hpp"

namespace cagp {

/// Validation failure; what() lists every problem, one per line, with the
/// key path and source line where known.
class ConfigError : public InputError {
 public:
  explicit ConfigError(const std::vector<std::string>& problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

/// Sectioned key = value text.
///
///   # comment            (also ';')
///   [section.sub]        dotted names nest sections
///   key = value          lists are comma separated
///
/// Keys must appear inside a section; duplicate sections or keys are errors.
struct ConfigFile {
  struct Entry {
    std::string key;
    std::string value;
    int line = 0;
  };
  struct Section {
    std::string name;
    std::vector<Entry> entries;
    int line = 0;
  };
  std::vector<Section> sections;

  static ConfigFile Parse(const std::string& text, const std::string& origin = "<config>");
  std::string Serialize() const;

  const Section* find_section(const std::string& name) const;
  const Entry* find(const std::string& section, const std::string& key) const;
  void set(const std::string& section, const std::string& key, const std::string& value);
  void erase_subtree(const std::string& prefix);
  bool operator==(const ConfigFile& other) const;
};

/// A validated experiment configuration: the scenario defaults overlaid with
/// the user's file. Every key is present, so accessors never fall back.
class ExperimentConfig {
 public:
  static const std::vector<std::string>& Scenarios();
  static ExperimentConfig Defaults(const std::string& scenario);

  const std::string& scenario() const { return scenario_; }
  const ConfigFile& file() const { return file_; }

  std::string text(const std::string& section, const std::string& key) const;
  double number(const std::string& section, const std::string& key) const;
  int integer(const std::string& section, const std::string& key) const;
  bool boolean(const std::string& section, const std::string& key) const;
  std::vector<double> numbers(const std::string& section, const std::string& key) const;
  std::vector<int> integers(const std::string& section, const std::string& key) const;
  Vector vector(const std::string& section, const std::string& key) const;
  /// True when the value is the literal "auto".
  bool is_auto(const std::string& section, const std::string& key) const;

  /// Kernel from nested sections; nullopt for type = none.
  std::optional<KernelSpec> kernel(const std::string& section) const;

  /// Overrides one value and revalidates; throws ConfigError.
  void set(const std::string& section, const std::string& key, const std::string& value);

  std::string Serialize() const { return file_.Serialize(); }
  bool operator==(const ExperimentConfig& other) const { return file_ == other.file_; }

 private:
  friend ExperimentConfig validate_config_text(const std::string&, const std::string&);
  void check() const;

  std::string scenario_;
  ConfigFile file_;
};

/// Parses and validates config text; unknown keys and malformed values are
/// reported together in one ConfigError.
ExperimentConfig validate_config_text(const std::string& text,
                                      const std::string& origin = "<config>");
ExperimentConfig validate_config(const std::string& path);

}  // namespace cagp
