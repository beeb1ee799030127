#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace ssanova {

/// Flat key-value configuration with [section] headers.  Parsing is strict:
/// readers must consume every key, and leftovers are reported by name.
struct ConfigFile {
  std::map<std::string, std::map<std::string, std::string>> sections;

  static ConfigFile parse(const std::string& text);
  static ConfigFile load(const std::string& path);
};

/// Typed access to one section.  Every get_* records the resolved value (the
/// default when the key is absent) into the manifest, so a run can echo its
/// full effective configuration.
class SectionReader {
public:
  SectionReader(const ConfigFile& file, std::string section,
                std::vector<std::string>* manifest);

  double get_double(const std::string& key, std::optional<double> def = {});
  long get_long(const std::string& key, std::optional<long> def = {});
  int get_int(const std::string& key, std::optional<int> def = {});
  bool get_bool(const std::string& key, std::optional<bool> def = {});
  std::string get_string(const std::string& key, std::optional<std::string> def = {});
  std::vector<double> get_double_list(const std::string& key,
                                      std::optional<std::vector<double>> def = {});
  std::vector<long> get_long_list(const std::string& key,
                                  std::optional<std::vector<long>> def = {});
  std::vector<int> get_int_list(const std::string& key,
                                std::optional<std::vector<int>> def = {});

  /// throws naming the first unconsumed key of the section
  void finish();

private:
  std::string raw(const std::string& key, bool& present);
  void record(const std::string& key, const std::string& value);

  const ConfigFile& file_;
  std::string section_;
  std::vector<std::string>* manifest_;
  std::set<std::string> consumed_;
};

/// rejects config files containing sections other than the ones read
void check_sections(const ConfigFile& file, const std::set<std::string>& known);

} // namespace ssanova
