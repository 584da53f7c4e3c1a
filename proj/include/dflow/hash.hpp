#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

namespace dflow {

/// Incremental 64-bit FNV-1a hash used for provenance fingerprints.
class Fingerprint {
public:
    Fingerprint& add(std::string_view bytes) {
        for (unsigned char c : bytes) {
            state_ ^= c;
            state_ *= 1099511628211ull;
        }
        return *this;
    }
    Fingerprint& add(double v) {
        char buf[sizeof(double)];
        std::memcpy(buf, &v, sizeof(double));
        return add(std::string_view(buf, sizeof(double)));
    }
    Fingerprint& add(long long v) { return add(static_cast<double>(v)); }
    Fingerprint& add(const std::vector<double>& v) {
        for (double x : v) add(x);
        return *this;
    }
    std::uint64_t value() const { return state_; }
    std::string hex() const {
        static const char* digits = "0123456789abcdef";
        std::string s(16, '0');
        std::uint64_t v = state_;
        for (int i = 15; i >= 0; --i, v >>= 4) s[i] = digits[v & 15];
        return s;
    }

private:
    std::uint64_t state_ = 1469598103934665603ull;
};

}  // namespace dflow
