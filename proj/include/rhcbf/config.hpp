#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace rhcbf {

/// Flat key = value configuration file: one assignment per line, '#' comments,
/// list values comma separated. Keys are case sensitive. Canonical
/// serialization (sorted keys) backs the config hash stamped into artifacts.
class KeyValueConfig {
 public:
  static KeyValueConfig from_file(const std::string& path);
  static KeyValueConfig from_string(const std::string& text);

  bool has(const std::string& key) const;
  void set(const std::string& key, const std::string& value);

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  std::vector<double> get_doubles(const std::string& key,
                                  const std::vector<double>& fallback) const;
  std::vector<int> get_ints(const std::string& key,
                            const std::vector<int>& fallback) const;
  std::vector<std::string> get_strings(
      const std::string& key, const std::vector<std::string>& fallback) const;

  std::string canonical() const;
  std::string hash() const;  // FNV-1a 64-bit of the canonical form, hex
  void write(const std::string& path) const;

 private:
  std::map<std::string, std::string> values_;
};

std::uint64_t fnv1a64(const std::string& data);

}  // namespace rhcbf
