#include "ipsg/audit.hpp"

#include "ipsg/error.hpp"
#include "ipsg/trust_store.hpp"

#include <charconv>
#include <cstdio>
#include <vector>

namespace ipsg {

namespace {

bool parse_line(std::string_view line, std::uint32_t previous, std::uint32_t& chain)
{
    std::vector<std::string_view> parts;
    std::size_t pos = 0;
    while (pos <= line.size()) {
        const auto sp = line.find(' ', pos);
        parts.push_back(line.substr(pos, sp == std::string_view::npos ? line.npos : sp - pos));
        if (sp == std::string_view::npos) break;
        pos = sp + 1;
    }
    if (parts.size() != 6 || parts[0] != "A") return false;

    std::uint64_t tick = 0;
    const auto [tp, tec] = std::from_chars(parts[1].data(), parts[1].data() + parts[1].size(), tick);
    if (tec != std::errc() || tp != parts[1].data() + parts[1].size() || parts[1].empty()) return false;
    if (!parse_audit_event(parts[2])) return false;
    if (parts[3].size() != 64 || !is_lower_hex(parts[3])) return false;
    if (parts[4] != "-" && !is_valid_principal(parts[4])) return false;
    if (parts[5].size() != 8 || !is_lower_hex(parts[5])) return false;

    std::uint32_t stored = 0;
    std::from_chars(parts[5].data(), parts[5].data() + 8, stored, 16);
    const std::string_view body = line.substr(0, line.size() - 8);
    if (audit_chain(previous, body) != stored) return false;
    chain = stored;
    return true;
}

}  // namespace

const char* to_string(AuditEvent event) noexcept
{
    switch (event) {
    case AuditEvent::Grant: return "GRANT";
    case AuditEvent::Revoke: return "REVOKE";
    case AuditEvent::Suppress: return "SUPPRESS";
    case AuditEvent::React: return "REACT";
    }
    return "?";
}

std::optional<AuditEvent> parse_audit_event(std::string_view text) noexcept
{
    if (text == "GRANT") return AuditEvent::Grant;
    if (text == "REVOKE") return AuditEvent::Revoke;
    if (text == "SUPPRESS") return AuditEvent::Suppress;
    if (text == "REACT") return AuditEvent::React;
    return std::nullopt;
}

std::string audit_body(const AuditEntry& entry)
{
    return "A " + std::to_string(entry.tick) + ' ' + to_string(entry.event) + ' ' + entry.digest.hex() + ' ' +
           entry.scope.render() + ' ';
}

std::uint32_t audit_chain(std::uint32_t previous, std::string_view body)
{
    std::string input = to_hex32(previous);
    input.append(body);
    return crc32(input);
}

AuditVerdict verify_audit_text(std::string_view text)
{
    std::uint32_t chain = kAuditGenesis;
    std::size_t lineno = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        ++lineno;
        const auto nl = text.find('\n', pos);
        // An unterminated final line is a torn write.
        if (nl == std::string_view::npos) return AuditVerdict::bad(lineno);
        if (!parse_line(text.substr(pos, nl - pos), chain, chain)) return AuditVerdict::bad(lineno);
        pos = nl + 1;
    }
    return AuditVerdict::ok(lineno, chain);
}

AuditVerdict verify_audit(const std::filesystem::path& path)
{
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) return AuditVerdict::ok(0, kAuditGenesis);
    return verify_audit_text(read_file(path));
}

void append_audit(const std::filesystem::path& path, const AuditEntry& entry)
{
    const AuditVerdict verdict = verify_audit(path);
    if (!verdict.valid) {
        throw ChainError("audit log " + path.string() + " fails verification at line " +
                         std::to_string(verdict.first_bad_line));
    }
    const std::string body = audit_body(entry);
    const std::string line = body + to_hex32(audit_chain(verdict.tail_chain, body)) + '\n';

    std::FILE* f = std::fopen(path.c_str(), "ab");
    if (f == nullptr) throw IoError("cannot open " + path.string() + " for append");
    const bool ok = std::fwrite(line.data(), 1, line.size(), f) == line.size();
    if (std::fclose(f) != 0 || !ok) throw IoError("failed appending to " + path.string());
}

void append_audit(const std::filesystem::path& path, std::uint64_t tick, AuditEvent event, const EntitySignature& sig,
                  const Scope& scope)
{
    append_audit(path, AuditEntry{tick, event, sig.digest, scope});
}

}  // namespace ipsg
