#pragma once

#include <compare>
#include <cstdint>
#include <limits>

namespace modio {

/// Virtual time with picosecond resolution.
///
/// Picoseconds keep wire times exact (a 1538-byte frame at 1 Gb/s is
/// 12'304'000 ps) and make cycle conversion exact for any clock that
/// divides 1 THz.
class Time {
public:
    constexpr Time() = default;

    static constexpr Time ps(std::int64_t v) { return Time{v}; }
    static constexpr Time ns(std::int64_t v) { return Time{v * 1'000}; }
    static constexpr Time us(std::int64_t v) { return Time{v * 1'000'000}; }
    static constexpr Time ms(std::int64_t v) { return Time{v * 1'000'000'000}; }
    static constexpr Time seconds(double v) {
        return Time{static_cast<std::int64_t>(v * 1e12 + (v >= 0 ? 0.5 : -0.5))};
    }
    static constexpr Time max() { return Time{std::numeric_limits<std::int64_t>::max()}; }

    constexpr std::int64_t as_ps() const { return ps_; }
    constexpr double as_ns() const { return static_cast<double>(ps_) / 1e3; }
    constexpr double as_us() const { return static_cast<double>(ps_) / 1e6; }
    constexpr double as_seconds() const { return static_cast<double>(ps_) / 1e12; }

    constexpr Time& operator+=(Time o) { ps_ += o.ps_; return *this; }
    constexpr Time& operator-=(Time o) { ps_ -= o.ps_; return *this; }
    friend constexpr Time operator+(Time a, Time b) { return Time{a.ps_ + b.ps_}; }
    friend constexpr Time operator-(Time a, Time b) { return Time{a.ps_ - b.ps_}; }
    friend constexpr Time operator*(Time a, std::int64_t k) { return Time{a.ps_ * k}; }
    friend constexpr auto operator<=>(Time, Time) = default;

private:
    constexpr explicit Time(std::int64_t v) : ps_(v) {}
    std::int64_t ps_ = 0;
};

} // namespace modio
