#pragma once

#include <cstdint>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace glyph {

using u8 = std::uint8_t;
using u16 = std::uint16_t;
using u32 = std::uint32_t;
using u64 = std::uint64_t;
using u128 = unsigned __int128;
using i8 = std::int8_t;
using i32 = std::int32_t;
using i64 = std::int64_t;
using i128 = __int128;

// Error taxonomy shared by the whole library. CLI maps these to exit codes.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// Mismatched or invalid scheme parameters.
struct ParameterError : Error {
    using Error::Error;
};
// Malformed input data (files, shapes, formats).
struct DataError : Error {
    using Error::Error;
};
// Noise budget exhausted or a switch refused for lack of margin.
struct BudgetError : Error {
    using Error::Error;
};
// Test-only facility invoked in production mode.
struct ModeError : Error {
    using Error::Error;
};

inline bool is_power_of_two(u64 x) { return x != 0 && (x & (x - 1)) == 0; }

inline u32 log2_exact(u64 x) {
    if (!is_power_of_two(x)) throw ParameterError("log2_exact: not a power of two");
    u32 l = 0;
    while ((x >>= 1) != 0) ++l;
    return l;
}

inline u64 ceil_div(u64 a, u64 b) { return (a + b - 1) / b; }

// Centered representative of x mod q in (-q/2, q/2].
inline i64 center_mod(u64 x, u64 q) {
    return (x > q / 2) ? static_cast<i64>(x) - static_cast<i64>(q) : static_cast<i64>(x);
}

inline u64 mod_reduce_signed(i64 v, u64 q) {
    i64 r = v % static_cast<i64>(q);
    if (r < 0) r += static_cast<i64>(q);
    return static_cast<u64>(r);
}

}  // namespace glyph
