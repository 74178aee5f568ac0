#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace ipsg {

// 256-bit content or token digest. Rendered as 64 lowercase hex characters.
class Digest {
public:
    static constexpr std::size_t kSize = 32;
    using Bytes = std::array<std::uint8_t, kSize>;

    Digest() = default;
    explicit Digest(const Bytes& bytes) : bytes_(bytes) {}

    /// Parses exactly 64 hex characters (either case); nullopt otherwise.
    static std::optional<Digest> from_hex(std::string_view hex);

    std::string hex() const;
    const Bytes& bytes() const noexcept { return bytes_; }

    auto operator<=>(const Digest&) const = default;

private:
    Bytes bytes_{};
};

Digest sha256(std::span<const std::uint8_t> data);
Digest sha256(std::string_view text);

std::uint32_t crc32(std::string_view text);

std::string to_hex(std::span<const std::uint8_t> data);
std::string to_hex32(std::uint32_t value);
std::optional<std::string> from_hex(std::string_view hex);

bool is_lower_hex(std::string_view text) noexcept;

}  // namespace ipsg
