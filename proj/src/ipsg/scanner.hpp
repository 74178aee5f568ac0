#pragma once

// Toy signature scanner with challenge-response allowlisting. A file whose
// bytes contain a threat pattern is flagged unless its content digest is
// trusted for the scanning principal; the operator earns that trust by echoing
// a one-time token together with valid credentials.

#include "ipsg/privilege.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace ipsg::scan {

inline constexpr char kConfirmedField[] = "operator_confirmed";
inline constexpr std::size_t kMaxPatternBytes = 64;
inline constexpr std::size_t kTokenLength = 6;
inline constexpr std::string_view kTokenAlphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";

struct ThreatSignature {
    std::string name;
    std::string pattern;  // raw bytes

    /// Throws InvalidArgument for a bad name or a pattern that is not 1-64
    /// bytes of even-length hex.
    static ThreatSignature from_hex(std::string name, std::string_view hex);
    std::string pattern_hex() const;
};

// Text form: "IPSSIG 1" then "S <name> <hex-pattern>" lines.
class SignatureDb {
public:
    SignatureDb() = default;
    explicit SignatureDb(std::vector<ThreatSignature> sigs);

    static SignatureDb parse(std::string_view text);
    static SignatureDb load(const std::filesystem::path& path);
    std::string serialize() const;
    void save(const std::filesystem::path& path) const;

    const std::vector<ThreatSignature>& signatures() const noexcept { return sigs_; }
    bool remove(std::string_view name);

private:
    std::vector<ThreatSignature> sigs_;
};

/// Names of every signature whose pattern occurs in `content`, in db order.
std::vector<std::string> match_signatures(std::string_view content, std::span<const ThreatSignature> db);

enum class Disposition { Flagged, SuppressedTrusted };

struct ScanFinding {
    std::string path;
    Digest content_digest;
    std::string matched;
    Disposition disposition = Disposition::Flagged;
};

struct ReadFailure {
    std::string path;
};

using ScanEntry = std::variant<ScanFinding, ReadFailure>;

struct ScanReport {
    std::vector<ScanEntry> entries;

    std::size_t flagged_count() const;
    std::size_t trusted_count() const;
    /// "F <path> <digest> <sig> <FLAGGED|TRUSTED>" and "X <path> READ_ERROR" lines.
    std::string render() const;
};

ScanReport scan(std::span<const std::filesystem::path> paths, const SignatureDb& db, const PrivilegeEngine& engine,
                const Scope& principal);

TrustPolicy scan_policy();

struct Credentials {
    std::string name;
    std::string salt;  // 16 raw bytes
    Digest verifier;   // sha256(salt || password)
};

// Text form: "IPSUSR 1" then "U <name> <salt:32hex> <verifier:64hex>" lines.
class UserDb {
public:
    static UserDb parse(std::string_view text);
    static UserDb load(const std::filesystem::path& path);
    std::string serialize() const;

    /// Throws InvalidArgument for duplicate names or a salt that is not 16 bytes.
    void add(const std::string& name, std::string_view salt, std::string_view password);
    const Credentials* find(std::string_view name) const;

private:
    std::vector<Credentials> users_;
};

bool verify_credentials(const UserDb& users, std::string_view name, std::string_view password);

struct Challenge {
    std::uint64_t id = 0;
    std::string token;
    Digest bound_digest;
    std::string path;
    std::string signature_name;
    Scope principal;
    std::uint64_t issued_tick = 0;
};

enum class RejectReason { TokenMismatch, PrincipalMismatch, BadCredentials };

const char* to_string(RejectReason reason) noexcept;

struct AnswerOutcome {
    bool granted = false;
    RejectReason reason = RejectReason::TokenMismatch;  // when !granted
    bool signature_removed = false;                     // literal mode only
};

// Issues and settles challenges for one interactive session. Tokens come from
// a 64-bit Mersenne Twister seeded once, so a seed fixes the token sequence.
class ChallengeIssuer {
public:
    explicit ChallengeIssuer(std::uint64_t seed);

    /// Throws NotFlaggedError unless the finding is Flagged.
    Challenge issue(const ScanFinding& finding, const Scope& principal);

    /// Every answer consumes the challenge; answering again throws
    /// ExpiredChallengeError. On success the (content digest, principal) pair
    /// gets a compliant episode, or, with `literal_db`, the matched signature
    /// is deleted from that database instead. Rejections change nothing.
    AnswerOutcome answer(const Challenge& challenge, std::string_view input_token, std::string_view name,
                         std::string_view password, const UserDb& users, PrivilegeEngine& engine,
                         SignatureDb* literal_db = nullptr);

private:
    std::string next_token();

    std::mt19937_64 rng_;
    std::uint64_t next_id_ = 0;
    std::set<std::uint64_t> open_;
};

}  // namespace ipsg::scan
