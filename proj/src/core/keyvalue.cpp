// Copyright 2026 The nestedsurf Authors
// SPDX-License-Identifier: Apache-2.0
#include "keyvalue.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "error.hpp"

namespace nestedsurf {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

double parse_real(const std::string& token, const std::string& context) {
  double v = 0;
  const char* first = token.data();
  const char* last = first + token.size();
  if (!token.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last)
    throw Error(ErrorKind::Format, context + ": malformed number '" + token + "'");
  return v;
}

long long parse_integer(const std::string& token, const std::string& context) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size())
    throw Error(ErrorKind::Format, context + ": malformed integer '" + token + "'");
  return v;
}

KeyValueFile KeyValueFile::parse(const std::string& text, const std::string& source_name) {
  KeyValueFile kv;
  kv.source_ = source_name;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorKind::Format, source_name + ":" + std::to_string(lineno) + ": expected 'key = value'");
    std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw Error(ErrorKind::Format, source_name + ":" + std::to_string(lineno) + ": empty key");
    kv.values_[key] = trim(t.substr(eq + 1));
  }
  return kv;
}

KeyValueFile KeyValueFile::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

std::optional<std::string> KeyValueFile::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  return it->second;
}

const std::string& KeyValueFile::require(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw Error(ErrorKind::Format, source_ + ": missing field '" + key + "'");
  return it->second;
}

std::vector<double> KeyValueFile::reals(const std::string& key) const {
  std::vector<double> out;
  for (const auto& tok : split_ws(require(key))) out.push_back(parse_real(tok, source_ + ": " + key));
  return out;
}

double KeyValueFile::real(const std::string& key) const {
  auto v = reals(key);
  if (v.size() != 1) throw Error(ErrorKind::Format, source_ + ": field '" + key + "' expects one number");
  return v[0];
}

long long KeyValueFile::integer(const std::string& key) const {
  auto toks = split_ws(require(key));
  if (toks.size() != 1) throw Error(ErrorKind::Format, source_ + ": field '" + key + "' expects one integer");
  return parse_integer(toks[0], source_ + ": " + key);
}

}  // namespace nestedsurf
