#pragma once

#include "pnp/core.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace pnp {

class ConfigError : public Error
{
public:
  using Error::Error;
};

/* Grammar of the TOML-like case files:
 *
 *   file    := { line }
 *   line    := blank | comment | header | pair
 *   comment := '#' ...
 *   header  := '[' name { '.' name } ']'
 *   pair    := key '=' value [ comment ]
 *   value   := '"' chars '"' | 'true' | 'false' | number
 *   name, key := [A-Za-z0-9_-]+
 *
 * Every pair belongs to the most recent header. Tables and keys may not repeat.
 * Strings accept the escapes \" \\ \n \t. */
struct ConfigValue
{
  enum class Type
  {
    string,
    number,
    boolean
  };

  Type type = Type::string;
  std::string text; // strings: unescaped contents; others: the literal
  double number = 0.0;
  bool boolean = false;
  int line = 0;
};

class ConfigTable
{
public:
  ConfigTable(std::string name, std::string source, int line);

  [[nodiscard]] std::string const &name() const { return name_; }
  [[nodiscard]] int line() const { return line_; }
  [[nodiscard]] std::vector<std::pair<std::string, ConfigValue>> const &entries() const { return entries_; }
  void add(std::string key, ConfigValue value);

  [[nodiscard]] bool has(std::string const &key) const;

  // Typed getters mark the key as used; a wrong type is a ConfigError.
  std::optional<std::string> get_string(std::string const &key) const;
  std::optional<double> get_double(std::string const &key) const;
  std::optional<long long> get_int(std::string const &key) const;
  std::optional<bool> get_bool(std::string const &key) const;

  std::string string_or(std::string const &key, std::string const &fallback) const;
  double double_or(std::string const &key, double fallback) const;
  long long int_or(std::string const &key, long long fallback) const;
  bool bool_or(std::string const &key, bool fallback) const;

  // Throws for keys no getter asked about (typos).
  void reject_unused() const;

private:
  ConfigValue const *find(std::string const &key) const;
  [[noreturn]] void fail(ConfigValue const &v, std::string const &key, char const *expected) const;

  std::string name_;
  std::string source_;
  int line_ = 0;
  std::vector<std::pair<std::string, ConfigValue>> entries_;
  mutable std::set<std::string> used_;
};

class ConfigDocument
{
public:
  static ConfigDocument parse(std::string const &text, std::string const &source = "<config>");
  static ConfigDocument load(std::filesystem::path const &path);

  [[nodiscard]] std::vector<ConfigTable> const &tables() const { return tables_; }
  [[nodiscard]] ConfigTable const *find(std::string const &name) const;
  // Tables named "<prefix>.<x>" in file order.
  [[nodiscard]] std::vector<ConfigTable const *> with_prefix(std::string const &prefix) const;

private:
  std::vector<ConfigTable> tables_;
};

} // namespace pnp
