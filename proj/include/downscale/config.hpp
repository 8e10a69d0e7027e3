#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace downscale {

// Key-value run configuration: `key = value` lines, '#' comments, repeated
// keys allowed where documented (covariate). Unknown keys are rejected with
// the offending name so typos fail loudly.
class RunConfig {
 public:
  static RunConfig parse(std::istream& is, const std::string& origin);
  static RunConfig parseFile(const std::string& path);

  bool has(const std::string& key) const;
  std::string get(const std::string& key) const;  // throws when absent
  std::string get(const std::string& key, const std::string& fallback) const;
  double getDouble(const std::string& key, double fallback) const;
  int getInt(const std::string& key, int fallback) const;
  bool getBool(const std::string& key, bool fallback) const;
  std::vector<std::string> getAll(const std::string& key) const;

  void set(const std::string& key, const std::string& value);

  // resolved-config copy written into every run's output directory
  void write(std::ostream& os) const;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace downscale
