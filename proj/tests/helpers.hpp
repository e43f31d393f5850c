// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>

#include "remreg/autograd.hpp"

namespace testing {

using remreg::Index;
using remreg::Shape;
using remreg::Tensor;
using remreg::Var;

template <typename T>
Var<T> constant(const Tensor<T>& t) {
  return Var<T>::constant(t);
}

template <typename T>
Var<T> leaf(const Tensor<T>& t) {
  return Var<T>::leaf(t, true);
}

template <typename A, typename B>
double max_abs_diff(const Tensor<A>& a, const Tensor<B>& b) {
  double m = 0.0;
  for (Index i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  return m;
}

template <typename T>
Tensor<T> ramp(const Shape& s) {
  Tensor<T> t(s);
  for (Index i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(i);
  return t;
}

/// Fresh scratch directory under the system temp path, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("remreg-test-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
