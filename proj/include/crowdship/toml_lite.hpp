#pragma once
#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace crowdship::toml_lite {

// Small TOML subset: [section] headers, key = value with strings, integers,
// floats, booleans and flat arrays, plus # comments. Exactly what the config
// schema needs; anything else is a parse error with a line number.
struct Value;
using Array = std::vector<Value>;

struct Value {
  std::variant<bool, std::int64_t, double, std::string, Array> data;

  Value() : data(std::int64_t{0}) {}
  Value(bool b) : data(b) {}
  Value(std::int64_t i) : data(i) {}
  Value(int i) : data(static_cast<std::int64_t>(i)) {}
  Value(double d) : data(d) {}
  Value(const char* s) : data(std::string(s)) {}
  Value(std::string s) : data(std::move(s)) {}
  Value(Array a) : data(std::move(a)) {}

  bool is_bool() const { return std::holds_alternative<bool>(data); }
  bool is_int() const { return std::holds_alternative<std::int64_t>(data); }
  bool is_float() const { return std::holds_alternative<double>(data); }
  bool is_string() const { return std::holds_alternative<std::string>(data); }
  bool is_array() const { return std::holds_alternative<Array>(data); }

  bool as_bool() const;
  std::int64_t as_int() const;
  double as_float() const;  // accepts ints too
  const std::string& as_string() const;
  const Array& as_array() const;
  std::vector<double> as_float_array() const;
  std::vector<std::string> as_string_array() const;

  bool operator==(const Value& other) const { return data == other.data; }
};

// Keys are "section.key"; top-level keys have no dot.
using Table = std::map<std::string, Value>;

Table parse(const std::string& text);
Table parse_file(const std::string& path);

// Sections emitted sorted; parse(serialize(t)) == t.
std::string serialize(const Table& table);
void write_file(const std::string& path, const Table& table);

}  // namespace crowdship::toml_lite
