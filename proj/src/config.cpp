#include "ssanova/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ssanova {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  size_t b = s.find_last_not_of(" \t\r");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

// inline comments start at a '#' preceded by whitespace (or at the start)
std::string strip_inline_comment(const std::string& s) {
  for (size_t i = 0; i < s.size(); ++i)
    if (s[i] == '#' && (i == 0 || s[i - 1] == ' ' || s[i - 1] == '\t'))
      return s.substr(0, i);
  return s;
}

} // namespace

ConfigFile ConfigFile::parse(const std::string& text) {
  ConfigFile cfg;
  std::istringstream is(text);
  std::string line, section;
  long lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';')
      continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw std::invalid_argument("config: malformed section header at line " +
                                    std::to_string(lineno));
      section = trim(t.substr(1, t.size() - 2));
      if (section.empty())
        throw std::invalid_argument("config: empty section name at line " +
                                    std::to_string(lineno));
      cfg.sections[section];
      continue;
    }
    const size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: expected 'key = value' at line " +
                                  std::to_string(lineno));
    const std::string key = trim(t.substr(0, eq));
    const std::string val = trim(strip_inline_comment(t.substr(eq + 1)));
    if (key.empty())
      throw std::invalid_argument("config: empty key at line " + std::to_string(lineno));
    if (section.empty())
      throw std::invalid_argument("config: key '" + key + "' outside any section");
    auto& sec = cfg.sections[section];
    if (sec.count(key))
      throw std::invalid_argument("config: duplicate key '" + section + "." + key + "'");
    sec[key] = val;
  }
  return cfg;
}

ConfigFile ConfigFile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw std::invalid_argument("config: cannot open file '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return parse(os.str());
}

SectionReader::SectionReader(const ConfigFile& file, std::string section,
                             std::vector<std::string>* manifest)
    : file_(file), section_(std::move(section)), manifest_(manifest) {}

std::string SectionReader::raw(const std::string& key, bool& present) {
  const auto sec = file_.sections.find(section_);
  if (sec == file_.sections.end()) {
    present = false;
    return "";
  }
  const auto it = sec->second.find(key);
  present = it != sec->second.end();
  if (present)
    consumed_.insert(key);
  return present ? it->second : "";
}

void SectionReader::record(const std::string& key, const std::string& value) {
  if (manifest_)
    manifest_->push_back(section_ + "." + key + " = " + value);
}

double SectionReader::get_double(const std::string& key, std::optional<double> def) {
  bool present = false;
  const std::string v = raw(key, present);
  if (!present) {
    if (!def)
      throw std::invalid_argument("config: missing required key '" + section_ + "." + key + "'");
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", *def);
    record(key, buf);
    return *def;
  }
  try {
    size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size())
      throw std::invalid_argument("trailing");
    record(key, v);
    return x;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: key '" + section_ + "." + key +
                                "' is not a number: '" + v + "'");
  }
}

long SectionReader::get_long(const std::string& key, std::optional<long> def) {
  bool present = false;
  const std::string v = raw(key, present);
  if (!present) {
    if (!def)
      throw std::invalid_argument("config: missing required key '" + section_ + "." + key + "'");
    record(key, std::to_string(*def));
    return *def;
  }
  try {
    size_t pos = 0;
    const long x = std::stol(v, &pos);
    if (pos != v.size())
      throw std::invalid_argument("trailing");
    record(key, v);
    return x;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: key '" + section_ + "." + key +
                                "' is not an integer: '" + v + "'");
  }
}

int SectionReader::get_int(const std::string& key, std::optional<int> def) {
  std::optional<long> ldef;
  if (def)
    ldef = *def;
  return static_cast<int>(get_long(key, ldef));
}

bool SectionReader::get_bool(const std::string& key, std::optional<bool> def) {
  bool present = false;
  const std::string v = raw(key, present);
  if (!present) {
    if (!def)
      throw std::invalid_argument("config: missing required key '" + section_ + "." + key + "'");
    record(key, *def ? "true" : "false");
    return *def;
  }
  record(key, v);
  if (v == "true" || v == "1" || v == "yes")
    return true;
  if (v == "false" || v == "0" || v == "no")
    return false;
  throw std::invalid_argument("config: key '" + section_ + "." + key +
                              "' is not a boolean: '" + v + "'");
}

std::string SectionReader::get_string(const std::string& key,
                                      std::optional<std::string> def) {
  bool present = false;
  const std::string v = raw(key, present);
  if (!present) {
    if (!def)
      throw std::invalid_argument("config: missing required key '" + section_ + "." + key + "'");
    record(key, *def);
    return *def;
  }
  record(key, v);
  return v;
}

std::vector<double> SectionReader::get_double_list(const std::string& key,
                                                   std::optional<std::vector<double>> def) {
  bool present = false;
  const std::string v = raw(key, present);
  if (!present) {
    if (!def)
      throw std::invalid_argument("config: missing required key '" + section_ + "." + key + "'");
    std::string joined;
    for (size_t i = 0; i < def->size(); ++i) {
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%.17g", (*def)[i]);
      joined += (i ? "," : "") + std::string(buf);
    }
    record(key, joined);
    return *def;
  }
  record(key, v);
  std::vector<double> out;
  std::istringstream is(v);
  std::string item;
  while (std::getline(is, item, ',')) {
    try {
      out.push_back(std::stod(trim(item)));
    } catch (const std::exception&) {
      throw std::invalid_argument("config: key '" + section_ + "." + key +
                                  "' has a non-numeric list entry: '" + item + "'");
    }
  }
  return out;
}

std::vector<long> SectionReader::get_long_list(const std::string& key,
                                               std::optional<std::vector<long>> def) {
  std::optional<std::vector<double>> ddef;
  if (def) {
    ddef.emplace();
    for (long x : *def)
      ddef->push_back(static_cast<double>(x));
  }
  std::vector<long> out;
  for (double x : get_double_list(key, ddef))
    out.push_back(static_cast<long>(x));
  return out;
}

std::vector<int> SectionReader::get_int_list(const std::string& key,
                                             std::optional<std::vector<int>> def) {
  std::optional<std::vector<long>> ldef;
  if (def) {
    ldef.emplace();
    for (int x : *def)
      ldef->push_back(x);
  }
  std::vector<int> out;
  for (long x : get_long_list(key, ldef))
    out.push_back(static_cast<int>(x));
  return out;
}

void SectionReader::finish() {
  const auto sec = file_.sections.find(section_);
  if (sec == file_.sections.end())
    return;
  for (const auto& [key, value] : sec->second)
    if (!consumed_.count(key))
      throw std::invalid_argument("config: unknown key '" + section_ + "." + key + "'");
}

void check_sections(const ConfigFile& file, const std::set<std::string>& known) {
  for (const auto& [name, keys] : file.sections)
    if (!known.count(name))
      throw std::invalid_argument("config: unknown section '" + name + "'");
}

} // namespace ssanova
