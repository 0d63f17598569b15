// Copyright 2026 The nestedsurf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace nestedsurf {

// Line-based "key = value" text. Blank lines and lines starting with '#' are
// skipped; later duplicates override earlier ones.
class KeyValueFile {
 public:
  static KeyValueFile parse(const std::string& text, const std::string& source_name);
  static KeyValueFile load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::optional<std::string> get(const std::string& key) const;
  // Throws Format naming the source when the key is missing.
  const std::string& require(const std::string& key) const;

  std::vector<double> reals(const std::string& key) const;
  double real(const std::string& key) const;
  long long integer(const std::string& key) const;

  const std::string& source() const noexcept { return source_; }

 private:
  std::string source_;
  std::map<std::string, std::string> values_;
};

std::string trim(const std::string& s);
std::vector<std::string> split_ws(const std::string& s);
double parse_real(const std::string& token, const std::string& context);
long long parse_integer(const std::string& token, const std::string& context);

}  // namespace nestedsurf
