#pragma once

#include <charconv>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>

namespace magvel {

/// Exact rational with 64-bit numerator/denominator, always normalized to
/// den > 0 and gcd(|num|, den) = 1. Arithmetic goes through 128-bit
/// intermediates and throws on overflow instead of wrapping.
class Rational {
public:
    Rational() : num_(0), den_(1) {}
    Rational(long long num) : num_(num), den_(1) {}
    Rational(long long num, long long den) : num_(num), den_(den) {
        if (den_ == 0) throw std::invalid_argument("Rational: zero denominator");
        normalize();
    }

    long long num() const { return num_; }
    long long den() const { return den_; }
    bool is_zero() const { return num_ == 0; }
    double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

    friend Rational operator+(const Rational& a, const Rational& b) {
        const __int128 n = static_cast<__int128>(a.num_) * b.den_ +
                           static_cast<__int128>(b.num_) * a.den_;
        const __int128 d = static_cast<__int128>(a.den_) * b.den_;
        return from_wide(n, d);
    }
    friend Rational operator-(const Rational& a, const Rational& b) {
        const __int128 n = static_cast<__int128>(a.num_) * b.den_ -
                           static_cast<__int128>(b.num_) * a.den_;
        const __int128 d = static_cast<__int128>(a.den_) * b.den_;
        return from_wide(n, d);
    }
    friend Rational operator*(const Rational& a, const Rational& b) {
        return from_wide(static_cast<__int128>(a.num_) * b.num_,
                         static_cast<__int128>(a.den_) * b.den_);
    }
    friend Rational operator*(long long a, const Rational& b) {
        return from_wide(static_cast<__int128>(a) * b.num_, static_cast<__int128>(b.den_));
    }
    friend bool operator==(const Rational&, const Rational&) = default;

    /// Accepts "p/q", a plain integer, or a finite decimal ("-2.25"); every
    /// accepted string is converted exactly. Anything else (in particular a
    /// symbolic or truncated irrational) is rejected.
    static Rational parse(std::string_view text) {
        std::string_view s = trimmed(text);
        if (s.empty()) throw std::invalid_argument("Rational: empty input");

        if (const auto slash = s.find('/'); slash != std::string_view::npos) {
            const long long p = parse_int(s.substr(0, slash), "numerator");
            const long long q = parse_int(s.substr(slash + 1), "denominator");
            return Rational(p, q);
        }
        if (const auto dot = s.find('.'); dot != std::string_view::npos) {
            std::string_view head = s.substr(0, dot);
            std::string_view frac = s.substr(dot + 1);
            if (frac.empty() || frac.find_first_not_of("0123456789") != std::string_view::npos)
                throw std::invalid_argument("Rational: malformed decimal '" + std::string(text) + "'");
            bool negative = !head.empty() && head.front() == '-';
            if (!head.empty() && (head.front() == '-' || head.front() == '+')) head.remove_prefix(1);
            __int128 whole = head.empty() ? 0 : parse_int(head, "integer part");
            __int128 den = 1;
            for (char c : frac) {
                whole = whole * 10 + (c - '0');
                den *= 10;
                if (den > max_ll()) throw std::overflow_error("Rational: decimal too long");
            }
            return from_wide(negative ? -whole : whole, den);
        }
        return Rational(parse_int(s, "integer"));
    }

private:
    static constexpr __int128 max_ll() { return static_cast<__int128>(INT64_MAX); }

    static Rational from_wide(__int128 n, __int128 d) {
        if (d == 0) throw std::invalid_argument("Rational: zero denominator");
        if (d < 0) { n = -n; d = -d; }
        const __int128 g = gcd_wide(n < 0 ? -n : n, d);
        if (g > 1) { n /= g; d /= g; }
        if (n > max_ll() || n < -max_ll() - 1 || d > max_ll())
            throw std::overflow_error("Rational: value exceeds 64-bit range");
        Rational r;
        r.num_ = static_cast<long long>(n);
        r.den_ = static_cast<long long>(d);
        return r;
    }

    static __int128 gcd_wide(__int128 a, __int128 b) {
        while (b != 0) { const __int128 t = a % b; a = b; b = t; }
        return a == 0 ? 1 : a;
    }

    static std::string_view trimmed(std::string_view s) {
        while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
        while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
        return s;
    }

    static long long parse_int(std::string_view s, const char* what) {
        s = trimmed(s);
        bool negative = false;
        if (!s.empty() && (s.front() == '+' || s.front() == '-')) {
            negative = s.front() == '-';
            s.remove_prefix(1);
        }
        long long value = 0;
        if (s.empty()) throw std::invalid_argument(std::string("Rational: missing ") + what);
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
        if (ec != std::errc{} || ptr != s.data() + s.size())
            throw std::invalid_argument(std::string("Rational: malformed ") + what + " '" + std::string(s) + "'");
        return negative ? -value : value;
    }

    void normalize() {
        if (den_ < 0) {
            if (num_ == INT64_MIN || den_ == INT64_MIN)
                throw std::overflow_error("Rational: cannot normalize INT64_MIN");
            num_ = -num_;
            den_ = -den_;
        }
        const long long g = std::gcd(num_, den_);
        if (g > 1) { num_ /= g; den_ /= g; }
    }

    long long num_;
    long long den_;
};

} // namespace magvel
