#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace vmbo {

// Flat "section.key" settings read from INI text. Every key has a documented
// default; unknown keys are rejected.
class Config {
 public:
  struct Key {
    const char* name;
    const char* fallback;
    const char* help;
  };
  static const std::vector<Key>& schema();

  Config();
  static Config load(const std::filesystem::path& path);
  static Config parse(std::istream& in, const std::string& source = "<config>");

  // Throws a config error naming the key if it is unknown.
  void set(const std::string& key, const std::string& value);
  const std::string& get(const std::string& key) const;

  double real(const std::string& key) const;
  long long integer(const std::string& key) const;
  std::uint64_t unsigned_integer(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::vector<double> reals(const std::string& key) const;
  std::vector<std::string> strings(const std::string& key) const;

  // All keys grouped into sections, defaults included.
  std::string to_ini() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace vmbo
