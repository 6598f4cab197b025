// Copyright 2026 The qsv Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qsv {

using Index = std::uint64_t;

/// Number of levels per QU-bit: 2 for the reduced model, 3 for the detailed
/// three-level ion model.
class Radix {
  public:
    constexpr Radix() = default;
    explicit Radix(int s) : s_(s) {
        if (s != 2 && s != 3) {
            throw std::invalid_argument("radix must be 2 or 3, got " +
                                        std::to_string(s));
        }
    }
    [[nodiscard]] constexpr int value() const { return s_; }
    friend constexpr bool operator==(Radix, Radix) = default;

  private:
    int s_ = 2;
};

/// base^exp with overflow detection.
inline Index ipow(Index base, int exp) {
    if (exp < 0) {
        throw std::invalid_argument("ipow: negative exponent");
    }
    Index r = 1;
    for (int k = 0; k < exp; ++k) {
        if (r > std::numeric_limits<Index>::max() / base) {
            throw std::overflow_error("ipow: overflow");
        }
        r *= base;
    }
    return r;
}

/// Digit of QU-bit `site` in `index` (site 0 is the least significant digit).
inline int digit_of(Index index, int site, Radix s) {
    const Index sv = static_cast<Index>(s.value());
    for (int k = 0; k < site; ++k) {
        index /= sv;
    }
    return static_cast<int>(index % sv);
}

inline std::vector<int> to_digits(Index index, int num_sites, Radix s) {
    std::vector<int> digits(static_cast<std::size_t>(num_sites));
    const Index sv = static_cast<Index>(s.value());
    for (auto &d : digits) {
        d = static_cast<int>(index % sv);
        index /= sv;
    }
    if (index != 0) {
        throw std::out_of_range("to_digits: index exceeds s^M");
    }
    return digits;
}

inline Index from_digits(std::span<const int> digits, Radix s) {
    Index index = 0;
    for (auto it = digits.rbegin(); it != digits.rend(); ++it) {
        if (*it < 0 || *it >= s.value()) {
            throw std::out_of_range("from_digits: digit out of range");
        }
        index = index * static_cast<Index>(s.value()) +
                static_cast<Index>(*it);
    }
    return index;
}

/// A (site, digit) requirement, used for controls and ownership filters.
struct SiteDigit {
    int site = 0;
    int digit = 1;
    friend bool operator==(const SiteDigit &, const SiteDigit &) = default;
};

using Condition = std::vector<SiteDigit>;

/// Raised when a parallel execution step would touch one of its own
/// parallel bits.
class PlanViolation : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

/// Raised when the block exchange loses or duplicates a message.
class TransportError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

} // namespace qsv
