#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace shellkg {

/// Stable 64-bit FNV-1a content hash. Parts are length-prefixed so that
/// ("ab", "c") and ("a", "bc") hash differently.
class StableHasher {
  public:
    StableHasher& add(std::string_view part) {
        add_u64(part.size());
        add_raw(part);
        return *this;
    }

    StableHasher& add_u64(std::uint64_t value) {
        for (int i = 0; i < 8; ++i) {
            mix(static_cast<unsigned char>(value >> (8 * i)));
        }
        return *this;
    }

    StableHasher& add_raw(std::string_view bytes) {
        for (const char c : bytes) {
            mix(static_cast<unsigned char>(c));
        }
        return *this;
    }

    [[nodiscard]] std::uint64_t value() const { return state_; }

  private:
    void mix(unsigned char byte) {
        state_ ^= byte;
        state_ *= 0x100000001b3ULL;
    }

    std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::string to_hex(std::uint64_t value) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[value & 0xF];
        value >>= 4;
    }
    return out;
}

}  // namespace shellkg
