/* Copyright 2026 The Meshplan Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef MESHPLAN_SECONDS_H_
#define MESHPLAN_SECONDS_H_

#include <cmath>
#include <compare>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>

namespace meshplan {

// Fixed-point time with picosecond resolution. Every modeled cost is rounded
// once when it is created; after that, sums and comparisons are exact integer
// arithmetic, so planners and oracles agree bit-for-bit regardless of
// summation order. Infinity is absorbing under addition.
class Seconds {
 public:
  static constexpr int64_t kTicksPerSecond = 1'000'000'000'000;

  constexpr Seconds() = default;

  static constexpr Seconds Zero() { return Seconds(0); }
  static constexpr Seconds Infinity() { return Seconds(kInfTicks); }
  static constexpr Seconds FromTicks(int64_t ticks) { return Seconds(ticks); }
  static constexpr Seconds FromWhole(int64_t whole_seconds) {
    return Seconds(whole_seconds * kTicksPerSecond);
  }
  // Rounds to the nearest picosecond; non-finite or out-of-range values map
  // to Infinity.
  static Seconds FromDouble(long double seconds) {
    if (!std::isfinite(static_cast<double>(seconds))) return Infinity();
    const long double ticks = seconds * kTicksPerSecond;
    if (ticks >= static_cast<long double>(kInfTicks)) return Infinity();
    return Seconds(static_cast<int64_t>(std::llround(ticks)));
  }

  constexpr int64_t ticks() const { return ticks_; }
  constexpr bool is_infinite() const { return ticks_ == kInfTicks; }
  constexpr bool is_finite() const { return ticks_ != kInfTicks; }
  double ToDouble() const {
    if (is_infinite()) return std::numeric_limits<double>::infinity();
    return static_cast<double>(ticks_) / static_cast<double>(kTicksPerSecond);
  }

  constexpr Seconds operator+(Seconds other) const {
    if (is_infinite() || other.is_infinite()) return Infinity();
    if (ticks_ > kInfTicks - other.ticks_) return Infinity();
    return Seconds(ticks_ + other.ticks_);
  }
  constexpr Seconds& operator+=(Seconds other) { return *this = *this + other; }
  // Saturating; only defined for finite minuends.
  constexpr Seconds operator-(Seconds other) const {
    if (is_infinite()) return Infinity();
    return Seconds(ticks_ - other.ticks_);
  }
  constexpr Seconds operator*(int64_t k) const {
    if (is_infinite()) return Infinity();
    if (k != 0 && ticks_ > kInfTicks / k) return Infinity();
    return Seconds(ticks_ * k);
  }

  constexpr auto operator<=>(const Seconds&) const = default;

  std::string ToString() const;

 private:
  static constexpr int64_t kInfTicks = std::numeric_limits<int64_t>::max();
  constexpr explicit Seconds(int64_t ticks) : ticks_(ticks) {}

  int64_t ticks_ = 0;
};

inline Seconds Max(Seconds a, Seconds b) { return a < b ? b : a; }
inline Seconds Min(Seconds a, Seconds b) { return b < a ? b : a; }

std::ostream& operator<<(std::ostream& os, Seconds s);

}  // namespace meshplan

#endif  // MESHPLAN_SECONDS_H_
