#pragma once

// Append-only audit log. Each line is
//
//   A <tick> <event> <digest> <scope> <chain>
//
// where <chain> is the CRC32 of the previous line's chain (8 hex digits,
// "00000000" for the first line) followed by the line's text up to and
// including the space before the chain field. Truncating the tail of the log
// is not detectable from the chain alone.

#include "ipsg/privilege.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace ipsg {

enum class AuditEvent { Grant, Revoke, Suppress, React };

const char* to_string(AuditEvent event) noexcept;
std::optional<AuditEvent> parse_audit_event(std::string_view text) noexcept;

struct AuditEntry {
    std::uint64_t tick = 0;
    AuditEvent event = AuditEvent::Grant;
    Digest digest;
    Scope scope;
};

inline constexpr std::uint32_t kAuditGenesis = 0;

std::string audit_body(const AuditEntry& entry);
std::uint32_t audit_chain(std::uint32_t previous, std::string_view body);

struct AuditVerdict {
    bool valid = true;
    std::size_t line_count = 0;       // lines checked when valid
    std::size_t first_bad_line = 0;   // 1-based, when invalid
    std::uint32_t tail_chain = kAuditGenesis;

    static AuditVerdict ok(std::size_t lines, std::uint32_t tail) { return {true, lines, 0, tail}; }
    static AuditVerdict bad(std::size_t line) { return {false, 0, line, kAuditGenesis}; }
};

AuditVerdict verify_audit_text(std::string_view text);

/// Absent or empty file is Valid(0). Throws IoError when unreadable.
AuditVerdict verify_audit(const std::filesystem::path& path);

/// Throws ChainError without writing when the existing log does not verify.
void append_audit(const std::filesystem::path& path, const AuditEntry& entry);
void append_audit(const std::filesystem::path& path, std::uint64_t tick, AuditEvent event, const EntitySignature& sig,
                  const Scope& scope);

}  // namespace ipsg
