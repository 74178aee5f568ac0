#include "ipsg/privilege.hpp"

#include "ipsg/error.hpp"

#include <cctype>
#include <charconv>

namespace ipsg {

namespace {

std::string_view trim(std::string_view s)
{
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::optional<std::int64_t> parse_int(std::string_view s)
{
    std::int64_t v = 0;
    const auto* end = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end || s.empty()) return std::nullopt;
    return v;
}

bool is_identifier(std::string_view s) noexcept
{
    if (s.empty()) return false;
    for (const char c : s) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-')) return false;
    }
    return true;
}

std::string render_value(const FieldValue& v)
{
    if (const auto* i = std::get_if<std::int64_t>(&v)) return std::to_string(*i);
    return '"' + std::get<std::string>(v) + '"';
}

Predicate parse_predicate(std::string_view text)
{
    text = trim(text);
    if (const auto eq = text.find("=="); eq != std::string_view::npos) {
        const auto field = trim(text.substr(0, eq));
        const auto literal = trim(text.substr(eq + 2));
        if (!is_identifier(field)) throw PolicyError("bad field name in rule: '" + std::string(text) + "'");
        if (literal.size() >= 2 && literal.front() == '"' && literal.back() == '"') {
            const auto inner = literal.substr(1, literal.size() - 2);
            if (inner.find('"') != std::string_view::npos) throw PolicyError("stray quote in rule literal");
            return {std::string(field), Predicate::Equals{std::string(inner)}};
        }
        const auto v = parse_int(literal);
        if (!v) throw PolicyError("bad literal in rule: '" + std::string(literal) + "'");
        return {std::string(field), Predicate::Equals{*v}};
    }

    // field in lo..hi
    const auto sp = text.find(' ');
    if (sp != std::string_view::npos) {
        const auto field = text.substr(0, sp);
        auto rest = trim(text.substr(sp));
        if (is_identifier(field) && rest.starts_with("in") && rest.size() > 2 &&
            std::isspace(static_cast<unsigned char>(rest[2]))) {
            rest = trim(rest.substr(2));
            const auto dots = rest.find("..");
            if (dots != std::string_view::npos) {
                const auto lo = parse_int(trim(rest.substr(0, dots)));
                const auto hi = parse_int(trim(rest.substr(dots + 2)));
                if (lo && hi) {
                    if (*lo > *hi) throw PolicyError("empty range in rule: '" + std::string(text) + "'");
                    return {std::string(field), Predicate::InRange{*lo, *hi}};
                }
            }
        }
    }
    throw PolicyError("unrecognized predicate: '" + std::string(text) + "'");
}

}  // namespace

const char* to_string(SignatureKind kind) noexcept
{
    return kind == SignatureKind::AgentToken ? "AgentToken" : "FileContent";
}

std::optional<SignatureKind> parse_signature_kind(std::string_view text) noexcept
{
    if (text == "AgentToken") return SignatureKind::AgentToken;
    if (text == "FileContent") return SignatureKind::FileContent;
    return std::nullopt;
}

bool is_valid_label(std::string_view label) noexcept
{
    return label.size() <= kMaxLabelLength && label.find_first_of("\r\n") == std::string_view::npos;
}

EntitySignature EntitySignature::make(const Digest& digest, SignatureKind kind, std::string label)
{
    if (!is_valid_label(label)) throw InvalidArgument("signature label must be at most 64 characters without newlines");
    return EntitySignature{digest, kind, std::move(label)};
}

bool is_valid_principal(std::string_view name) noexcept
{
    if (name.empty() || name == "-" || name.size() > kMaxPrincipalLength) return false;
    for (const char c : name) {
        const auto u = static_cast<unsigned char>(c);
        if (u <= 0x20 || u == 0x7f) return false;
    }
    return true;
}

Scope Scope::principal(std::string name)
{
    if (!is_valid_principal(name)) throw InvalidArgument("invalid principal name: '" + name + "'");
    Scope s;
    s.name_ = std::move(name);
    return s;
}

Scope Scope::parse(std::string_view text)
{
    if (text == "-") return global();
    return principal(std::string(text));
}

Ratio::Ratio(std::uint64_t num, std::uint64_t den) : num_(num), den_(den)
{
    if (den == 0) throw InvalidArgument("ratio with zero denominator");
}

std::string Ratio::to_string() const { return std::to_string(num_) + "/" + std::to_string(den_); }

bool operator==(const Ratio& a, const Ratio& b) noexcept { return (a <=> b) == 0; }

std::strong_ordering operator<=>(const Ratio& a, const Ratio& b) noexcept
{
    using Wide = unsigned __int128;
    return Wide{a.num_} * b.den_ <=> Wide{b.num_} * a.den_;
}

bool Predicate::evaluate(const FieldMap& outcome) const
{
    const auto it = outcome.find(field);
    if (it == outcome.end()) throw PolicyError("rule references missing outcome field '" + field + "'");
    const FieldValue& v = it->second;
    if (const auto* eq = std::get_if<Equals>(&test)) return v == eq->value;
    const auto& range = std::get<InRange>(test);
    const auto* i = std::get_if<std::int64_t>(&v);
    return i != nullptr && range.lo <= *i && *i <= range.hi;
}

ComplianceRule ComplianceRule::parse(std::string_view text)
{
    std::vector<Predicate> preds;
    if (trim(text).empty()) return ComplianceRule();
    std::size_t pos = 0;
    while (true) {
        const auto next = text.find("&&", pos);
        preds.push_back(parse_predicate(text.substr(pos, next == std::string_view::npos ? text.npos : next - pos)));
        if (next == std::string_view::npos) break;
        pos = next + 2;
    }
    return ComplianceRule(std::move(preds));
}

bool ComplianceRule::holds(const FieldMap& outcome) const
{
    for (const auto& p : all_of_) {
        if (!outcome.contains(p.field)) throw PolicyError("rule references missing outcome field '" + p.field + "'");
    }
    for (const auto& p : all_of_) {
        if (!p.evaluate(outcome)) return false;
    }
    return true;
}

std::string ComplianceRule::to_string() const
{
    std::string out;
    for (const auto& p : all_of_) {
        if (!out.empty()) out += " && ";
        out += p.field;
        if (const auto* eq = std::get_if<Predicate::Equals>(&p.test)) {
            out += " == " + render_value(eq->value);
        } else {
            const auto& r = std::get<Predicate::InRange>(p.test);
            out += " in " + std::to_string(r.lo) + ".." + std::to_string(r.hi);
        }
    }
    return out;
}

void TrustPolicy::validate() const
{
    if (min_compliant < 1) throw PolicyError("min_compliant must be at least 1");
    if (quotient_threshold > Ratio(1, 1)) throw PolicyError("quotient_threshold must lie in [0,1]");
}

bool TrustRecord::well_formed() const noexcept
{
    return compliant_count <= total_count && granted == granted_tick.has_value();
}

bool operator==(const TrustRecord& a, const TrustRecord& b) noexcept
{
    return a.signature == b.signature && a.signature.label == b.signature.label && a.scope == b.scope &&
           a.compliant_count == b.compliant_count && a.total_count == b.total_count && a.granted == b.granted &&
           a.granted_tick == b.granted_tick;
}

Ratio trust_quotient(const TrustRecord& record)
{
    if (record.total_count == 0) return Ratio(0, 1);
    return Ratio(record.compliant_count, record.total_count);
}

const char* to_string(TrustDecision::Kind kind) noexcept
{
    switch (kind) {
    case TrustDecision::Kind::Granted: return "Granted";
    case TrustDecision::Kind::Pending: return "Pending";
    case TrustDecision::Kind::NonCompliant: return "NonCompliant";
    }
    return "?";
}

PrivilegeEngine::PrivilegeEngine(TrustPolicy policy) : policy_(std::move(policy)) { policy_.validate(); }

Reaction PrivilegeEngine::classify(const Observation& obs, const Scope& scope, std::string_view default_action) const
{
    if (is_trusted(obs.signature, scope)) return Reaction::suppress();
    return Reaction::react(std::string(default_action));
}

TrustDecision PrivilegeEngine::record_outcome(const Episode& episode)
{
    if (episode.start_tick > episode.end_tick) throw InvalidArgument("episode ends before it starts");
    // Evaluate before touching the store so a PolicyError leaves it unchanged.
    const bool compliant = policy_.rule.holds(episode.outcome);

    auto [it, inserted] = store_.try_emplace(key_of(episode.signature, episode.scope));
    TrustRecord& rec = it->second;
    if (inserted) {
        rec.signature = episode.signature;
        rec.scope = episode.scope;
    }
    ++rec.total_count;
    if (compliant) ++rec.compliant_count;

    const Ratio q = trust_quotient(rec);
    if (!rec.granted && rec.compliant_count >= policy_.min_compliant && q >= policy_.quotient_threshold) {
        rec.granted = true;
        rec.granted_tick = episode.end_tick;
    }
    if (rec.granted) return {TrustDecision::Kind::Granted, q};
    return {compliant ? TrustDecision::Kind::Pending : TrustDecision::Kind::NonCompliant, q};
}

bool PrivilegeEngine::is_trusted(const EntitySignature& sig, const Scope& scope) const
{
    const TrustRecord* rec = find(sig, scope);
    return rec != nullptr && rec->granted;
}

bool PrivilegeEngine::revoke(const EntitySignature& sig, const Scope& scope)
{
    const auto it = store_.find(key_of(sig, scope));
    if (it == store_.end() || !it->second.granted) return false;
    it->second.granted = false;
    it->second.granted_tick.reset();
    return true;
}

const TrustRecord* PrivilegeEngine::find(const EntitySignature& sig, const Scope& scope) const
{
    const auto it = store_.find(key_of(sig, scope));
    return it == store_.end() ? nullptr : &it->second;
}

std::vector<TrustRecord> PrivilegeEngine::records() const
{
    std::vector<TrustRecord> out;
    out.reserve(store_.size());
    for (const auto& [key, rec] : store_) out.push_back(rec);
    return out;
}

void PrivilegeEngine::restore(const std::vector<TrustRecord>& records)
{
    std::map<Key, TrustRecord> next;
    for (const auto& rec : records) {
        if (!rec.well_formed()) throw InvalidArgument("malformed trust record");
        if (!is_valid_label(rec.signature.label)) throw InvalidArgument("malformed trust record label");
        if (!next.emplace(key_of(rec.signature, rec.scope), rec).second) {
            throw DuplicateKeyError("duplicate trust record for " + rec.signature.digest.hex() + " " +
                                    rec.scope.render());
        }
    }
    store_ = std::move(next);
}

}  // namespace ipsg
