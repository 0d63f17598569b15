// Copyright 2026 The nestedsurf Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace nestedsurf {

enum class ErrorKind {
  InvalidArgument,  // caller-side precondition failure
  Io,               // file cannot be opened, read or written
  Format,           // malformed header, CSV or mesh file
  Geometry,         // grid geometry mismatch, open mesh, orientation
  Domain,           // value-range problems: iso outside range, no sign change
  Convergence,      // optimizer gave up
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace nestedsurf
