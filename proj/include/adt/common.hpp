// Copyright (c) 2026 the adt authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>


namespace adt {

inline constexpr const char* kVersion = "0.1.0";

using Shape = std::vector<long>;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape/dimension mismatch between operands.
struct ShapeError : Error {
  using Error::Error;
};

// NaN or other numeric breakdown during evaluation.
struct NumericError : Error {
  using Error::Error;
};

// Violated precondition / invalid argument.
struct ContractError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ", ";
    os << s[i];
  }
  os << ']';
  return os.str();
}

inline long shape_numel(const Shape& s) {
  long n = 1;
  for (long d : s) n *= d;
  return n;
}

// FNV-1a, used for config/teacher provenance hashes.
inline std::uint64_t fnv1a64(const void* data, size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 1469598103934665603ULL;
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

}  // namespace adt
