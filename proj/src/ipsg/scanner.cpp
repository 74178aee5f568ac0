#include "ipsg/scanner.hpp"

#include "ipsg/error.hpp"
#include "ipsg/trust_store.hpp"

#include <openssl/crypto.h>

#include <algorithm>
#include <functional>
#include <limits>
#include <sstream>

namespace ipsg::scan {

namespace {

bool is_name(std::string_view s) noexcept
{
    if (s.empty() || s.size() > 64) return false;
    return std::none_of(s.begin(), s.end(), [](char c) {
        const auto u = static_cast<unsigned char>(c);
        return u <= 0x20 || u == 0x7f;
    });
}

std::vector<std::string> words(const std::string& line)
{
    std::istringstream ls(line);
    std::vector<std::string> out;
    for (std::string w; ls >> w;) out.push_back(w);
    return out;
}

// Yields (line number, fields) for every non-blank line after the header.
template <typename Fn>
void for_each_entry(std::string_view text, std::string_view header, Fn&& fn)
{
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line) || line != header) {
        throw FormatError("expected header '" + std::string(header) + "'", 1);
    }
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        const auto fields = words(line);
        if (fields.empty()) continue;
        fn(lineno, fields);
    }
}

}  // namespace

ThreatSignature ThreatSignature::from_hex(std::string name, std::string_view hex)
{
    if (!is_name(name)) throw InvalidArgument("invalid signature name '" + name + "'");
    auto bytes = ipsg::from_hex(hex);
    if (!bytes || bytes->empty() || bytes->size() > kMaxPatternBytes) {
        throw InvalidArgument("signature '" + name + "' needs 1-64 bytes of even-length hex");
    }
    return ThreatSignature{std::move(name), std::move(*bytes)};
}

std::string ThreatSignature::pattern_hex() const
{
    return to_hex(std::span(reinterpret_cast<const std::uint8_t*>(pattern.data()), pattern.size()));
}

SignatureDb::SignatureDb(std::vector<ThreatSignature> sigs) : sigs_(std::move(sigs))
{
    std::set<std::string_view> names;
    for (const auto& s : sigs_) {
        if (!names.insert(s.name).second) throw InvalidArgument("duplicate signature name '" + s.name + "'");
    }
}

SignatureDb SignatureDb::parse(std::string_view text)
{
    std::vector<ThreatSignature> sigs;
    std::set<std::string> names;
    for_each_entry(text, "IPSSIG 1", [&](std::size_t lineno, const std::vector<std::string>& f) {
        if (f.size() != 3 || f[0] != "S") throw FormatError("expected 'S <name> <hex-pattern>'", lineno);
        if (!names.insert(f[1]).second) throw FormatError("duplicate signature name", lineno);
        try {
            sigs.push_back(ThreatSignature::from_hex(f[1], f[2]));
        } catch (const InvalidArgument& e) {
            throw FormatError(e.what(), lineno);
        }
    });
    return SignatureDb(std::move(sigs));
}

SignatureDb SignatureDb::load(const std::filesystem::path& path) { return parse(read_file(path)); }

std::string SignatureDb::serialize() const
{
    std::string out = "IPSSIG 1\n";
    for (const auto& s : sigs_) out += "S " + s.name + ' ' + s.pattern_hex() + '\n';
    return out;
}

void SignatureDb::save(const std::filesystem::path& path) const { write_file_atomic(path, serialize()); }

bool SignatureDb::remove(std::string_view name)
{
    const auto it = std::find_if(sigs_.begin(), sigs_.end(), [&](const ThreatSignature& s) { return s.name == name; });
    if (it == sigs_.end()) return false;
    sigs_.erase(it);
    return true;
}

std::vector<std::string> match_signatures(std::string_view content, std::span<const ThreatSignature> db)
{
    std::vector<std::string> out;
    for (const auto& sig : db) {
        if (sig.pattern.size() > content.size()) continue;
        const std::boyer_moore_horspool_searcher searcher(sig.pattern.begin(), sig.pattern.end());
        if (std::search(content.begin(), content.end(), searcher) != content.end() &&
            std::find(out.begin(), out.end(), sig.name) == out.end()) {
            out.push_back(sig.name);
        }
    }
    return out;
}

std::size_t ScanReport::flagged_count() const
{
    return std::count_if(entries.begin(), entries.end(), [](const ScanEntry& e) {
        const auto* f = std::get_if<ScanFinding>(&e);
        return f != nullptr && f->disposition == Disposition::Flagged;
    });
}

std::size_t ScanReport::trusted_count() const
{
    return std::count_if(entries.begin(), entries.end(), [](const ScanEntry& e) {
        const auto* f = std::get_if<ScanFinding>(&e);
        return f != nullptr && f->disposition == Disposition::SuppressedTrusted;
    });
}

std::string ScanReport::render() const
{
    std::string out;
    for (const auto& e : entries) {
        if (const auto* f = std::get_if<ScanFinding>(&e)) {
            out += "F " + f->path + ' ' + f->content_digest.hex() + ' ' + f->matched + ' ' +
                   (f->disposition == Disposition::Flagged ? "FLAGGED" : "TRUSTED") + '\n';
        } else {
            out += "X " + std::get<ReadFailure>(e).path + " READ_ERROR\n";
        }
    }
    return out;
}

ScanReport scan(std::span<const std::filesystem::path> paths, const SignatureDb& db, const PrivilegeEngine& engine,
                const Scope& principal)
{
    ScanReport report;
    for (const auto& path : paths) {
        std::string content;
        try {
            content = read_file(path);
        } catch (const IoError&) {
            report.entries.emplace_back(ReadFailure{path.string()});
            continue;
        }
        const auto matches = match_signatures(content, db.signatures());
        if (matches.empty()) continue;
        const EntitySignature sig{sha256(content), SignatureKind::FileContent, {}};
        const bool trusted = engine.is_trusted(sig, principal);
        for (const auto& name : matches) {
            report.entries.emplace_back(ScanFinding{path.string(), sig.digest, name,
                                                    trusted ? Disposition::SuppressedTrusted : Disposition::Flagged});
        }
    }
    return report;
}

TrustPolicy scan_policy()
{
    TrustPolicy policy;
    policy.rule = ComplianceRule({Predicate{kConfirmedField, Predicate::Equals{std::int64_t{1}}}});
    return policy;
}

UserDb UserDb::parse(std::string_view text)
{
    UserDb db;
    for_each_entry(text, "IPSUSR 1", [&](std::size_t lineno, const std::vector<std::string>& f) {
        if (f.size() != 4 || f[0] != "U") throw FormatError("expected 'U <name> <salt> <verifier>'", lineno);
        if (!is_valid_principal(f[1])) throw FormatError("invalid user name", lineno);
        if (db.find(f[1]) != nullptr) throw FormatError("duplicate user", lineno);
        const auto salt = ipsg::from_hex(f[2]);
        if (f[2].size() != 32 || !salt) throw FormatError("salt must be 32 hex characters", lineno);
        const auto verifier = Digest::from_hex(f[3]);
        if (!verifier) throw FormatError("verifier must be 64 hex characters", lineno);
        db.users_.push_back(Credentials{f[1], *salt, *verifier});
    });
    return db;
}

UserDb UserDb::load(const std::filesystem::path& path) { return parse(read_file(path)); }

std::string UserDb::serialize() const
{
    std::string out = "IPSUSR 1\n";
    for (const auto& u : users_) {
        out += "U " + u.name + ' ' +
               to_hex(std::span(reinterpret_cast<const std::uint8_t*>(u.salt.data()), u.salt.size())) + ' ' +
               u.verifier.hex() + '\n';
    }
    return out;
}

void UserDb::add(const std::string& name, std::string_view salt, std::string_view password)
{
    if (!is_valid_principal(name)) throw InvalidArgument("invalid user name '" + name + "'");
    if (find(name) != nullptr) throw InvalidArgument("duplicate user '" + name + "'");
    if (salt.size() != 16) throw InvalidArgument("salt must be 16 bytes");
    std::string material(salt);
    material.append(password);
    users_.push_back(Credentials{name, std::string(salt), sha256(material)});
}

const Credentials* UserDb::find(std::string_view name) const
{
    for (const auto& u : users_) {
        if (u.name == name) return &u;
    }
    return nullptr;
}

bool verify_credentials(const UserDb& users, std::string_view name, std::string_view password)
{
    const Credentials* c = users.find(name);
    if (c == nullptr) return false;
    std::string material = c->salt;
    material.append(password);
    const Digest d = sha256(material);
    return CRYPTO_memcmp(d.bytes().data(), c->verifier.bytes().data(), Digest::kSize) == 0;
}

const char* to_string(RejectReason reason) noexcept
{
    switch (reason) {
    case RejectReason::TokenMismatch: return "token_mismatch";
    case RejectReason::PrincipalMismatch: return "principal_mismatch";
    case RejectReason::BadCredentials: return "bad_credentials";
    }
    return "?";
}

ChallengeIssuer::ChallengeIssuer(std::uint64_t seed) : rng_(seed) {}

std::string ChallengeIssuer::next_token()
{
    // Rejection sampling keeps every symbol equally likely.
    constexpr std::uint64_t n = kTokenAlphabet.size();
    constexpr std::uint64_t limit = n * (std::numeric_limits<std::uint64_t>::max() / n);
    std::string token;
    while (token.size() < kTokenLength) {
        const std::uint64_t v = rng_();
        if (v < limit) token.push_back(kTokenAlphabet[v % n]);
    }
    return token;
}

Challenge ChallengeIssuer::issue(const ScanFinding& finding, const Scope& principal)
{
    if (finding.disposition != Disposition::Flagged) throw NotFlaggedError("finding for " + finding.path + " is not flagged");
    Challenge c;
    c.id = next_id_++;
    c.token = next_token();
    c.bound_digest = finding.content_digest;
    c.path = finding.path;
    c.signature_name = finding.matched;
    c.principal = principal;
    c.issued_tick = c.id;
    open_.insert(c.id);
    return c;
}

AnswerOutcome ChallengeIssuer::answer(const Challenge& challenge, std::string_view input_token, std::string_view name,
                                      std::string_view password, const UserDb& users, PrivilegeEngine& engine,
                                      SignatureDb* literal_db)
{
    if (challenge.id >= next_id_) throw InvalidArgument("challenge was not issued by this session");
    if (open_.erase(challenge.id) == 0) throw ExpiredChallengeError("challenge already answered");

    AnswerOutcome out;
    if (input_token != challenge.token) {
        out.reason = RejectReason::TokenMismatch;
        return out;
    }
    if (challenge.principal.is_global() || name != challenge.principal.name()) {
        out.reason = RejectReason::PrincipalMismatch;
        return out;
    }
    if (!verify_credentials(users, name, password)) {
        out.reason = RejectReason::BadCredentials;
        return out;
    }

    out.granted = true;
    if (literal_db != nullptr) {
        out.signature_removed = literal_db->remove(challenge.signature_name);
        return out;
    }
    std::string label = std::filesystem::path(challenge.path).filename().string().substr(0, kMaxLabelLength);
    std::replace_if(label.begin(), label.end(), [](char c) { return c == '\n' || c == '\r'; }, '?');
    const Episode ep{EntitySignature{challenge.bound_digest, SignatureKind::FileContent, std::move(label)},
                     challenge.principal,
                     {{kConfirmedField, std::int64_t{1}}},
                     challenge.issued_tick,
                     challenge.issued_tick};
    engine.record_outcome(ep);
    return out;
}

}  // namespace ipsg::scan
