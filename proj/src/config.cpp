#include "pnp/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/core.h>

namespace pnp {

namespace {

bool is_name_char(char c)
{
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_' || c == '-';
}

std::string trim(std::string const &s)
{
  auto const b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) {
    return {};
  }
  auto const e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool valid_name(std::string const &s)
{
  if (s.empty()) {
    return false;
  }
  for (char c : s) {
    if (!is_name_char(c)) {
      return false;
    }
  }
  return true;
}

// Strips a trailing comment that is not inside a string.
std::string strip_comment(std::string const &s)
{
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char const c = s[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
    } else if (c == '"') {
      in_string = true;
    } else if (c == '#') {
      return s.substr(0, i);
    }
  }
  return s;
}

} // namespace

ConfigTable::ConfigTable(std::string name, std::string source, int line)
  : name_{std::move(name)}
  , source_{std::move(source)}
  , line_{line}
{
}

void ConfigTable::add(std::string key, ConfigValue value)
{
  if (has(key)) {
    throw ConfigError(fmt::format("{}:{}: duplicate key '{}' in [{}]", source_, value.line, key, name_));
  }
  entries_.emplace_back(std::move(key), std::move(value));
}

bool ConfigTable::has(std::string const &key) const
{
  return find(key) != nullptr;
}

ConfigValue const *ConfigTable::find(std::string const &key) const
{
  for (auto const &[k, v] : entries_) {
    if (k == key) {
      return &v;
    }
  }
  return nullptr;
}

void ConfigTable::fail(ConfigValue const &v, std::string const &key, char const *expected) const
{
  throw ConfigError(fmt::format("{}:{}: [{}] {} must be {}, got '{}'", source_, v.line, name_, key, expected, v.text));
}

std::optional<std::string> ConfigTable::get_string(std::string const &key) const
{
  used_.insert(key);
  auto const *v = find(key);
  if (!v) {
    return std::nullopt;
  }
  if (v->type != ConfigValue::Type::string) {
    fail(*v, key, "a string");
  }
  return v->text;
}

std::optional<double> ConfigTable::get_double(std::string const &key) const
{
  used_.insert(key);
  auto const *v = find(key);
  if (!v) {
    return std::nullopt;
  }
  if (v->type != ConfigValue::Type::number) {
    fail(*v, key, "a number");
  }
  return v->number;
}

std::optional<long long> ConfigTable::get_int(std::string const &key) const
{
  used_.insert(key);
  auto const *v = find(key);
  if (!v) {
    return std::nullopt;
  }
  if (v->type != ConfigValue::Type::number || v->number != std::floor(v->number) || std::abs(v->number) > 9.0e15) {
    fail(*v, key, "an integer");
  }
  return static_cast<long long>(v->number);
}

std::optional<bool> ConfigTable::get_bool(std::string const &key) const
{
  used_.insert(key);
  auto const *v = find(key);
  if (!v) {
    return std::nullopt;
  }
  if (v->type != ConfigValue::Type::boolean) {
    fail(*v, key, "true or false");
  }
  return v->boolean;
}

std::string ConfigTable::string_or(std::string const &key, std::string const &fallback) const
{
  return get_string(key).value_or(fallback);
}

double ConfigTable::double_or(std::string const &key, double fallback) const
{
  return get_double(key).value_or(fallback);
}

long long ConfigTable::int_or(std::string const &key, long long fallback) const
{
  return get_int(key).value_or(fallback);
}

bool ConfigTable::bool_or(std::string const &key, bool fallback) const
{
  return get_bool(key).value_or(fallback);
}

void ConfigTable::reject_unused() const
{
  for (auto const &[k, v] : entries_) {
    if (!used_.contains(k)) {
      throw ConfigError(fmt::format("{}:{}: unknown key '{}' in [{}]", source_, v.line, k, name_));
    }
  }
}

ConfigDocument ConfigDocument::parse(std::string const &text, std::string const &source)
{
  ConfigDocument doc;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  auto error = [&](std::string const &msg) { return ConfigError(fmt::format("{}:{}: {}", source, line_no, msg)); };

  while (std::getline(in, raw)) {
    ++line_no;
    std::string const line = trim(strip_comment(raw));
    if (line.empty()) {
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw error("unterminated table header");
      }
      std::string const name = trim(line.substr(1, line.size() - 2));
      std::size_t start = 0;
      while (true) {
        auto const dot = name.find('.', start);
        std::string const part = name.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (!valid_name(part)) {
          throw error(fmt::format("invalid table name '{}'", name));
        }
        if (dot == std::string::npos) {
          break;
        }
        start = dot + 1;
      }
      if (doc.find(name)) {
        throw error(fmt::format("duplicate table [{}]", name));
      }
      doc.tables_.emplace_back(name, source, line_no);
      continue;
    }

    auto const eq = line.find('=');
    if (eq == std::string::npos) {
      throw error("expected 'key = value'");
    }
    std::string const key = trim(line.substr(0, eq));
    std::string const rhs = trim(line.substr(eq + 1));
    if (!valid_name(key)) {
      throw error(fmt::format("invalid key '{}'", key));
    }
    if (doc.tables_.empty()) {
      throw error(fmt::format("key '{}' outside of any table", key));
    }
    if (rhs.empty()) {
      throw error(fmt::format("missing value for '{}'", key));
    }

    ConfigValue v;
    v.line = line_no;
    if (rhs.front() == '"') {
      v.type = ConfigValue::Type::string;
      std::size_t i = 1;
      bool closed = false;
      for (; i < rhs.size(); ++i) {
        char const c = rhs[i];
        if (c == '"') {
          closed = true;
          break;
        }
        if (c == '\\') {
          if (++i >= rhs.size()) {
            break;
          }
          switch (rhs[i]) {
          case '"': v.text += '"'; break;
          case '\\': v.text += '\\'; break;
          case 'n': v.text += '\n'; break;
          case 't': v.text += '\t'; break;
          default: throw error(fmt::format("unknown escape '\\{}'", rhs[i]));
          }
        } else {
          v.text += c;
        }
      }
      if (!closed || i + 1 != rhs.size()) {
        throw error("malformed string");
      }
    } else if (rhs == "true" || rhs == "false") {
      v.type = ConfigValue::Type::boolean;
      v.boolean = rhs == "true";
      v.text = rhs;
    } else {
      v.type = ConfigValue::Type::number;
      v.text = rhs;
      char *end = nullptr;
      v.number = std::strtod(rhs.c_str(), &end);
      if (end != rhs.c_str() + rhs.size() || !std::isfinite(v.number)) {
        throw error(fmt::format("invalid value '{}'", rhs));
      }
    }
    doc.tables_.back().add(key, std::move(v));
  }
  return doc;
}

ConfigDocument ConfigDocument::load(std::filesystem::path const &path)
{
  std::ifstream in(path);
  if (!in) {
    throw ConfigError(fmt::format("cannot open config '{}'", path.string()));
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

ConfigTable const *ConfigDocument::find(std::string const &name) const
{
  for (auto const &t : tables_) {
    if (t.name() == name) {
      return &t;
    }
  }
  return nullptr;
}

std::vector<ConfigTable const *> ConfigDocument::with_prefix(std::string const &prefix) const
{
  std::vector<ConfigTable const *> out;
  std::string const p = prefix + ".";
  for (auto const &t : tables_) {
    if (t.name().size() > p.size() && t.name().compare(0, p.size(), p) == 0) {
      out.push_back(&t);
    }
  }
  return out;
}

} // namespace pnp
