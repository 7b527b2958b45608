#include "crowdship/toml_lite.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace crowdship::toml_lite {

bool Value::as_bool() const {
  if (!is_bool()) throw std::runtime_error("config value is not a boolean");
  return std::get<bool>(data);
}

std::int64_t Value::as_int() const {
  if (!is_int()) throw std::runtime_error("config value is not an integer");
  return std::get<std::int64_t>(data);
}

double Value::as_float() const {
  if (is_int()) return static_cast<double>(std::get<std::int64_t>(data));
  if (!is_float()) throw std::runtime_error("config value is not a number");
  return std::get<double>(data);
}

const std::string& Value::as_string() const {
  if (!is_string()) throw std::runtime_error("config value is not a string");
  return std::get<std::string>(data);
}

const Array& Value::as_array() const {
  if (!is_array()) throw std::runtime_error("config value is not an array");
  return std::get<Array>(data);
}

std::vector<double> Value::as_float_array() const {
  std::vector<double> out;
  for (const auto& v : as_array()) out.push_back(v.as_float());
  return out;
}

std::vector<std::string> Value::as_string_array() const {
  std::vector<std::string> out;
  for (const auto& v : as_array()) out.push_back(v.as_string());
  return out;
}

namespace {

[[noreturn]] void fail(int line, const std::string& what) {
  throw std::runtime_error("config parse error at line " +
                           std::to_string(line) + ": " + what);
}

struct Cursor {
  const std::string& s;
  std::size_t i = 0;
  int line;

  void skip_ws() {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
  }
  bool done() {
    skip_ws();
    return i >= s.size() || s[i] == '#';
  }
  char peek() { return i < s.size() ? s[i] : '\0'; }
};

std::string parse_basic_string(Cursor& c) {
  // Opening quote already consumed by the caller.
  std::string out;
  while (true) {
    if (c.i >= c.s.size()) fail(c.line, "unterminated string");
    char ch = c.s[c.i++];
    if (ch == '"') return out;
    if (ch == '\\') {
      if (c.i >= c.s.size()) fail(c.line, "dangling escape");
      char e = c.s[c.i++];
      switch (e) {
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        default: fail(c.line, std::string("unsupported escape \\") + e);
      }
    } else {
      out += ch;
    }
  }
}

Value parse_scalar(Cursor& c);

Value parse_array(Cursor& c) {
  Array arr;
  c.skip_ws();
  if (c.peek() == ']') {
    ++c.i;
    return Value(arr);
  }
  while (true) {
    c.skip_ws();
    arr.push_back(parse_scalar(c));
    c.skip_ws();
    char ch = c.peek();
    if (ch == ',') {
      ++c.i;
      c.skip_ws();
      if (c.peek() == ']') {  // trailing comma
        ++c.i;
        return Value(arr);
      }
      continue;
    }
    if (ch == ']') {
      ++c.i;
      return Value(arr);
    }
    fail(c.line, "expected ',' or ']' in array");
  }
}

Value parse_scalar(Cursor& c) {
  char ch = c.peek();
  if (ch == '"') {
    ++c.i;
    return Value(parse_basic_string(c));
  }
  if (ch == '[') {
    ++c.i;
    return parse_array(c);
  }
  std::size_t start = c.i;
  while (c.i < c.s.size() && c.s[c.i] != ',' && c.s[c.i] != ']' &&
         c.s[c.i] != '#' && c.s[c.i] != ' ' && c.s[c.i] != '\t')
    ++c.i;
  std::string tok = c.s.substr(start, c.i - start);
  if (tok.empty()) fail(c.line, "expected a value");
  if (tok == "true") return Value(true);
  if (tok == "false") return Value(false);
  bool floaty = tok.find_first_of(".eE") != std::string::npos &&
                tok.find("0x") != 0;
  try {
    std::size_t used = 0;
    if (floaty) {
      double d = std::stod(tok, &used);
      if (used != tok.size()) fail(c.line, "malformed number '" + tok + "'");
      return Value(d);
    }
    long long v = std::stoll(tok, &used);
    if (used != tok.size()) fail(c.line, "malformed number '" + tok + "'");
    return Value(static_cast<std::int64_t>(v));
  } catch (const std::invalid_argument&) {
    fail(c.line, "malformed value '" + tok + "'");
  } catch (const std::out_of_range&) {
    fail(c.line, "number out of range '" + tok + "'");
  }
}

bool valid_key_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

}  // namespace

Table parse(const std::string& text) {
  Table table;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    Cursor c{raw, 0, line};
    if (c.done()) continue;
    if (c.peek() == '[') {
      ++c.i;
      std::size_t start = c.i;
      while (c.i < raw.size() && raw[c.i] != ']') ++c.i;
      if (c.i >= raw.size()) fail(line, "unterminated section header");
      section = raw.substr(start, c.i - start);
      if (section.empty()) fail(line, "empty section name");
      for (char ch : section)
        if (!valid_key_char(ch)) fail(line, "bad section name '" + section + "'");
      ++c.i;
      if (!c.done()) fail(line, "trailing characters after section header");
      continue;
    }
    std::size_t start = c.i;
    while (c.i < raw.size() && valid_key_char(raw[c.i])) ++c.i;
    std::string key = raw.substr(start, c.i - start);
    if (key.empty()) fail(line, "expected a key");
    c.skip_ws();
    if (c.peek() != '=') fail(line, "expected '=' after key '" + key + "'");
    ++c.i;
    c.skip_ws();
    Value v = parse_scalar(c);
    if (!c.done()) fail(line, "trailing characters after value for '" + key + "'");
    std::string full = section.empty() ? key : section + "." + key;
    if (table.count(full)) fail(line, "duplicate key '" + full + "'");
    table.emplace(std::move(full), std::move(v));
  }
  return table;
}

Table parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

namespace {

std::string format_float(double d) {
  if (!std::isfinite(d))
    throw std::runtime_error("cannot serialize non-finite number");
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", d);
  std::string s(buf);
  // Shorten when a lower precision round-trips exactly.
  for (int prec = 1; prec < 17; ++prec) {
    char b2[40];
    std::snprintf(b2, sizeof(b2), "%.*g", prec, d);
    if (std::stod(b2) == d) {
      s = b2;
      break;
    }
  }
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

std::string format_string(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

std::string format_value(const Value& v) {
  if (v.is_bool()) return v.as_bool() ? "true" : "false";
  if (v.is_int()) return std::to_string(v.as_int());
  if (v.is_float()) return format_float(std::get<double>(v.data));
  if (v.is_string()) return format_string(v.as_string());
  std::string out = "[";
  const auto& arr = v.as_array();
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (i) out += ", ";
    out += format_value(arr[i]);
  }
  return out + "]";
}

}  // namespace

std::string serialize(const Table& table) {
  std::ostringstream out;
  // Top-level keys first, then each section; std::map keeps both sorted.
  for (const auto& [k, v] : table)
    if (k.find('.') == std::string::npos)
      out << k << " = " << format_value(v) << "\n";
  std::string current;

  for (const auto& [k, v] : table) {
    auto dot = k.find('.');
    if (dot == std::string::npos) continue;
    std::string section = k.substr(0, dot);
    if (section != current) {
      out << "\n[" << section << "]\n";
      current = section;
    }
    out << k.substr(dot + 1) << " = " << format_value(v) << "\n";
  }
  return out.str();
}

void write_file(const std::string& path, const Table& table) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config file: " + path);
  out << serialize(table);
}

}  // namespace crowdship::toml_lite
