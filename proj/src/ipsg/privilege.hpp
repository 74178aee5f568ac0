#pragma once

// Trust acquisition engine. An entity provokes the default reaction until an
// interaction episode that satisfies the trust policy marks it as granted;
// from then on observations of that entity are suppressed for the scope the
// grant was made under.

#include "ipsg/digest.hpp"

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <variant>
#include <vector>

namespace ipsg {

enum class SignatureKind { AgentToken, FileContent };

const char* to_string(SignatureKind kind) noexcept;
std::optional<SignatureKind> parse_signature_kind(std::string_view text) noexcept;

inline constexpr std::size_t kMaxLabelLength = 64;
inline constexpr std::size_t kMaxPrincipalLength = 64;

/// Identity of an external agent or of file content. Equality ignores the
/// label, which is display-only.
struct EntitySignature {
    Digest digest;
    SignatureKind kind = SignatureKind::AgentToken;
    std::string label;

    /// Throws InvalidArgument when the label is too long or holds a newline.
    static EntitySignature make(const Digest& digest, SignatureKind kind, std::string label = {});

    friend bool operator==(const EntitySignature& a, const EntitySignature& b) noexcept
    {
        return a.digest == b.digest && a.kind == b.kind;
    }
};

bool is_valid_label(std::string_view label) noexcept;

/// Either a named principal or the global marker. Rendered as the principal
/// name, or "-" for global.
class Scope {
public:
    static Scope global() { return Scope(); }
    /// Throws InvalidArgument for names that are empty, "-", too long, or
    /// contain whitespace or control characters.
    static Scope principal(std::string name);
    /// Inverse of render().
    static Scope parse(std::string_view text);

    bool is_global() const noexcept { return name_.empty(); }
    const std::string& name() const noexcept { return name_; }
    std::string render() const { return is_global() ? "-" : name_; }

    auto operator<=>(const Scope&) const = default;

private:
    std::string name_;
};

bool is_valid_principal(std::string_view name) noexcept;

using FieldValue = std::variant<std::int64_t, std::string>;
using FieldMap = std::map<std::string, FieldValue, std::less<>>;

struct Observation {
    EntitySignature signature;
    std::string site;
    FieldMap features;
    std::uint64_t tick = 0;
};

class Reaction {
public:
    static Reaction react(std::string action) { return Reaction(false, std::move(action)); }
    static Reaction suppress() { return Reaction(true, {}); }

    bool suppressed() const noexcept { return suppressed_; }
    // Empty for Suppress.
    const std::string& action() const noexcept { return action_; }

    friend bool operator==(const Reaction&, const Reaction&) = default;

private:
    Reaction(bool suppressed, std::string action) : suppressed_(suppressed), action_(std::move(action)) {}

    bool suppressed_;
    std::string action_;
};

struct Episode {
    EntitySignature signature;
    Scope scope;
    FieldMap outcome;
    std::uint64_t start_tick = 0;
    std::uint64_t end_tick = 0;
};

/// Non-negative exact rational. Comparisons never round.
class Ratio {
public:
    constexpr Ratio() = default;
    /// Throws InvalidArgument when den == 0.
    Ratio(std::uint64_t num, std::uint64_t den);

    std::uint64_t num() const noexcept { return num_; }
    std::uint64_t den() const noexcept { return den_; }
    double to_double() const noexcept { return static_cast<double>(num_) / static_cast<double>(den_); }
    std::string to_string() const;

    friend bool operator==(const Ratio& a, const Ratio& b) noexcept;
    friend std::strong_ordering operator<=>(const Ratio& a, const Ratio& b) noexcept;

private:
    std::uint64_t num_ = 0;
    std::uint64_t den_ = 1;
};

// One atomic test over a named outcome field.
struct Predicate {
    struct Equals {
        FieldValue value;
        friend bool operator==(const Equals&, const Equals&) = default;
    };
    struct InRange {
        std::int64_t lo = 0;
        std::int64_t hi = 0;
        friend bool operator==(const InRange&, const InRange&) = default;
    };

    std::string field;
    std::variant<Equals, InRange> test;

    /// Throws PolicyError when `field` is absent from `outcome`. A type
    /// mismatch (text vs integer) evaluates to false.
    bool evaluate(const FieldMap& outcome) const;

    friend bool operator==(const Predicate&, const Predicate&) = default;
};

/// Conjunction of predicates. Text form, predicates joined by "&&":
///   returned == 1 && operator == "alice" && score in 3..7
class ComplianceRule {
public:
    ComplianceRule() = default;
    explicit ComplianceRule(std::vector<Predicate> all_of) : all_of_(std::move(all_of)) {}

    /// Throws PolicyError on malformed text.
    static ComplianceRule parse(std::string_view text);

    /// Every referenced field is checked for presence before any predicate is
    /// evaluated, so a misconfigured rule is reported regardless of order.
    bool holds(const FieldMap& outcome) const;

    const std::vector<Predicate>& predicates() const noexcept { return all_of_; }
    std::string to_string() const;

    friend bool operator==(const ComplianceRule&, const ComplianceRule&) = default;

private:
    std::vector<Predicate> all_of_;
};

struct TrustPolicy {
    ComplianceRule rule;
    std::uint32_t min_compliant = 1;
    Ratio quotient_threshold{0, 1};

    /// Throws PolicyError when min_compliant is 0 or the threshold exceeds 1.
    void validate() const;
};

struct TrustRecord {
    EntitySignature signature;
    Scope scope;
    std::uint64_t compliant_count = 0;
    std::uint64_t total_count = 0;
    bool granted = false;
    std::optional<std::uint64_t> granted_tick;

    /// Structural checks only: counters ordered, granted_tick present iff granted.
    bool well_formed() const noexcept;

    // Field-wise, label included.
    friend bool operator==(const TrustRecord& a, const TrustRecord& b) noexcept;
};

/// compliant / total, or 0 for a record with no episodes.
Ratio trust_quotient(const TrustRecord& record);

struct TrustDecision {
    enum class Kind { Granted, Pending, NonCompliant };
    Kind kind;
    Ratio quotient;

    friend bool operator==(const TrustDecision&, const TrustDecision&) = default;
};

const char* to_string(TrustDecision::Kind kind) noexcept;

class PrivilegeEngine {
public:
    explicit PrivilegeEngine(TrustPolicy policy = {});

    const TrustPolicy& policy() const noexcept { return policy_; }

    /// Suppress iff the observed signature is trusted under `scope`; never
    /// mutates the engine.
    Reaction classify(const Observation& obs, const Scope& scope, std::string_view default_action) const;

    /// Folds one finished episode into the record for (signature, scope).
    /// Throws PolicyError (state unchanged) when the rule names a field the
    /// outcome lacks, InvalidArgument when start_tick > end_tick.
    TrustDecision record_outcome(const Episode& episode);

    /// Exact-key lookup; a principal scope never falls back to global.
    bool is_trusted(const EntitySignature& sig, const Scope& scope) const;

    /// Clears a grant, keeping the counters. False when nothing was granted.
    bool revoke(const EntitySignature& sig, const Scope& scope);

    const TrustRecord* find(const EntitySignature& sig, const Scope& scope) const;

    /// Records ordered by (digest, kind, scope).
    std::vector<TrustRecord> records() const;

    /// Replaces the whole store. Throws DuplicateKeyError on a repeated key and
    /// InvalidArgument on a malformed record; the engine is unchanged on error.
    void restore(const std::vector<TrustRecord>& records);

    std::size_t size() const noexcept { return store_.size(); }

private:
    using Key = std::tuple<Digest, SignatureKind, Scope>;
    static Key key_of(const EntitySignature& sig, const Scope& scope)
    {
        return {sig.digest, sig.kind, scope};
    }

    TrustPolicy policy_;
    std::map<Key, TrustRecord> store_;
};

}  // namespace ipsg
