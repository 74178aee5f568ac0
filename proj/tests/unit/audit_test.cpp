#include "doctest.h"

#include "ipsg/audit.hpp"
#include "ipsg/error.hpp"
#include "ipsg/trust_store.hpp"
#include "temp_dir.hpp"

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

using namespace ipsg;
using ipsg::testing::TempDir;

namespace {

// Bit-at-a-time reflected CRC-32 (poly 0xEDB88320), independent of zlib.
std::uint32_t crc32_bitwise(std::string_view s)
{
    std::uint32_t c = 0xffffffffu;
    for (unsigned char ch : s) {
        c ^= ch;
        for (int k = 0; k < 8; ++k) c = (c >> 1) ^ (0xedb88320u & (0u - (c & 1u)));
    }
    return ~c;
}

std::string hex8(std::uint32_t v)
{
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08x", v);
    return buf;
}

// Re-derives every chain value of a log from scratch.
bool chain_recomputes(const std::string& text, std::size_t& lines)
{
    std::istringstream in(text);
    std::string line;
    std::string prev = "00000000";
    lines = 0;
    while (std::getline(in, line)) {
        ++lines;
        const auto cut = line.rfind(' ');
        const std::string body = line.substr(0, cut + 1);
        const std::string chain = line.substr(cut + 1);
        if (hex8(crc32_bitwise(prev + body)) != chain) return false;
        prev = chain;
    }
    return true;
}

std::vector<std::string> lines_of(const std::string& text)
{
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

EntitySignature sig(int i)
{
    return EntitySignature{sha256("s" + std::to_string(i)), SignatureKind::AgentToken, {}};
}

}  // namespace

TEST_CASE("crc32 agrees with the bitwise reference")
{
    CHECK(crc32_bitwise("123456789") == 0xcbf43926u);
    CHECK(crc32("123456789") == 0xcbf43926u);
    std::mt19937_64 rng(3);
    for (int i = 0; i < 200; ++i) {
        std::string s(rng() % 100, '\0');
        for (auto& ch : s) ch = static_cast<char>(rng());
        CHECK(crc32(s) == crc32_bitwise(s));
    }
}

TEST_CASE("genesis line")
{
    TempDir dir;
    Digest::Bytes ab{};
    for (auto& b : ab) b = 0xab;
    append_audit(dir / "a.log", AuditEntry{3, AuditEvent::Grant, Digest(ab), Scope::global()});
    const std::string text = read_file(dir / "a.log");
    const std::string body = "A 3 GRANT " + std::string(64, 'x') + " - ";
    std::string expected_body = body;
    for (std::size_t i = 10; i < 74; i += 2) {
        expected_body[i] = 'a';
        expected_body[i + 1] = 'b';
    }
    CHECK(text == expected_body + "2b56201d\n");
    CHECK(hex8(crc32_bitwise("00000000" + expected_body)) == "2b56201d");
}

TEST_CASE("append three and verify")
{
    TempDir dir;
    const auto path = dir / "a.log";
    append_audit(path, 1, AuditEvent::Grant, sig(1), Scope::global());
    append_audit(path, 2, AuditEvent::Revoke, sig(1), Scope::global());
    append_audit(path, 7, AuditEvent::Grant, sig(2), Scope::principal("alice"));
    const auto v = verify_audit(path);
    CHECK(v.valid);
    CHECK(v.line_count == 3);
    std::size_t lines = 0;
    CHECK(chain_recomputes(read_file(path), lines));
    CHECK(lines == 3);
    CHECK(lines_of(read_file(path))[2].substr(0, 12) == "A 7 GRANT " + sha256("s2").hex().substr(0, 2));
}

TEST_CASE("append refuses a log with an edited line")
{
    TempDir dir;
    const auto path = dir / "a.log";
    for (int i = 0; i < 3; ++i) append_audit(path, static_cast<std::uint64_t>(i), AuditEvent::Grant, sig(i), Scope::global());
    auto lines = lines_of(read_file(path));
    lines[1][2] = '9';
    std::string edited;
    for (const auto& l : lines) edited += l + "\n";
    write_file_atomic(path, edited);
    CHECK_THROWS_AS(append_audit(path, 9, AuditEvent::Revoke, sig(0), Scope::global()), ChainError);
    CHECK(read_file(path) == edited);
    const auto v = verify_audit(path);
    CHECK_FALSE(v.valid);
    CHECK(v.first_bad_line == 2);
}

TEST_CASE("five lines, then truncated to three")
{
    TempDir dir;
    const auto path = dir / "a.log";
    for (int i = 0; i < 5; ++i) append_audit(path, static_cast<std::uint64_t>(i), AuditEvent::Suppress, sig(i), Scope::global());
    CHECK(verify_audit(path).line_count == 5);
    const auto lines = lines_of(read_file(path));
    write_file_atomic(path, lines[0] + "\n" + lines[1] + "\n" + lines[2] + "\n");
    const auto v = verify_audit(path);
    CHECK(v.valid);
    CHECK(v.line_count == 3);
}

TEST_CASE("absent or empty log is valid with zero lines")
{
    TempDir dir;
    CHECK(verify_audit(dir / "none.log").valid);
    CHECK(verify_audit(dir / "none.log").line_count == 0);
    write_file_atomic(dir / "empty.log", "");
    CHECK(verify_audit(dir / "empty.log").line_count == 0);
    CHECK(verify_audit_text("").valid);
}

TEST_CASE("malformed log text")
{
    std::string line = "A 1 GRANT " + sha256("x").hex() + " - ";
    line += hex8(crc32_bitwise("00000000" + line));
    CHECK(verify_audit_text(line + "\n").valid);
    CHECK_FALSE(verify_audit_text(line).valid);
    CHECK_FALSE(verify_audit_text(line + "\n\n").valid);
    std::string upper = line;
    for (auto& c : upper) c = static_cast<char>(std::toupper(c));
    CHECK_FALSE(verify_audit_text(upper + "\n").valid);
}

TEST_CASE("random event sequences always verify and any edited line is rejected")
{
    std::mt19937_64 rng(11);
    for (int round = 0; round < 30; ++round) {
        std::string text;
        std::uint32_t prev = kAuditGenesis;
        const int n = 1 + static_cast<int>(rng() % 8);
        for (int i = 0; i < n; ++i) {
            const AuditEntry e{rng() % 1000, rng() % 2 ? AuditEvent::Grant : AuditEvent::Revoke, sha256(std::to_string(rng())),
                               rng() % 2 ? Scope::global() : Scope::principal("u" + std::to_string(rng() % 5))};
            const std::string body = audit_body(e);
            prev = audit_chain(prev, body);
            text += body + to_hex32(prev) + "\n";
        }
        std::size_t lines = 0;
        REQUIRE(chain_recomputes(text, lines));
        REQUIRE(verify_audit_text(text).line_count == static_cast<std::size_t>(n));
        for (std::size_t pos = 0; pos < text.size(); ++pos) {
            if (text[pos] == '\n') continue;
            std::string bad = text;
            bad[pos] = bad[pos] == '0' ? '1' : '0';
            const auto v = verify_audit_text(bad);
            CHECK_FALSE(v.valid);
            CHECK(v.first_bad_line == static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(pos), '\n')) + 1);
        }
    }
}
