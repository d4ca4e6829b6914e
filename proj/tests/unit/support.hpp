#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <doctest.h>

#include "binscatter/error.hpp"

namespace testing {

struct Sample {
  std::vector<double> x, y;
};

inline Sample uniform_sample(std::uint64_t seed, std::size_t n, const std::function<double(double)>& mu,
                             double noise = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::normal_distribution<double> N(0.0, noise);
  Sample s;
  for (std::size_t i = 0; i < n; ++i) {
    s.x.push_back(U(rng));
    s.y.push_back(mu(s.x.back()) + N(rng));
  }
  return s;
}

template <typename F>
binscatter::ErrorCode error_code_of(F&& f) {
  try {
    f();
  } catch (const binscatter::Error& e) {
    return e.code();
  }
  FAIL("expected binscatter::Error");
  return binscatter::ErrorCode::InvalidArgument;
}

}  // namespace testing

#define CHECK_ERROR(expr, code_) CHECK(testing::error_code_of([&] { (void)(expr); }) == (code_))
