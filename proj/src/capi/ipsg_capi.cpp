#include "ipsg/ipsg.h"

#include "ipsg/audit.hpp"
#include "ipsg/error.hpp"
#include "ipsg/privilege.hpp"
#include "ipsg/scanner.hpp"
#include "ipsg/sim.hpp"
#include "ipsg/trust_store.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <cstring>
#include <new>
#include <optional>
#include <string>

struct ipsg_engine {
    ipsg::PrivilegeEngine engine;
};

struct ipsg_scenario {
    ipsg::sim::Scenario scenario;
};

struct ipsg_sim_result {
    ipsg::sim::RunResult result;
};

struct ipsg_sigdb {
    ipsg::scan::SignatureDb db;
};

struct ipsg_userdb {
    ipsg::scan::UserDb db;
};

struct ipsg_report {
    ipsg::scan::ScanReport report;
};

struct ipsg_session {
    ipsg::scan::ChallengeIssuer issuer;
};

struct ipsg_challenge {
    ipsg::scan::Challenge challenge;
};

namespace {

thread_local std::string g_last_error;
thread_local std::size_t g_last_line = 0;

ipsg_status status_of(ipsg::ErrorCode code)
{
    using ipsg::ErrorCode;
    switch (code) {
    case ErrorCode::Policy: return IPSG_E_POLICY;
    case ErrorCode::Io: return IPSG_E_IO;
    case ErrorCode::Format: return IPSG_E_FORMAT;
    case ErrorCode::Integrity: return IPSG_E_INTEGRITY;
    case ErrorCode::Version: return IPSG_E_VERSION;
    case ErrorCode::DuplicateKey: return IPSG_E_DUPLICATE_KEY;
    case ErrorCode::Chain: return IPSG_E_CHAIN;
    case ErrorCode::Domain: return IPSG_E_DOMAIN;
    case ErrorCode::Scenario: return IPSG_E_SCENARIO;
    case ErrorCode::Trace: return IPSG_E_TRACE;
    case ErrorCode::NotFlagged: return IPSG_E_NOT_FLAGGED;
    case ErrorCode::ExpiredChallenge: return IPSG_E_EXPIRED_CHALLENGE;
    case ErrorCode::InvalidArgument: return IPSG_E_INVALID_ARGUMENT;
    }
    return IPSG_E_INTERNAL;
}

ipsg_status fail(ipsg_status status, std::string message, std::size_t line = 0)
{
    g_last_error = std::move(message);
    g_last_line = line;
    return status;
}

// Runs `fn`, translating exceptions into status codes.
template <typename Fn>
ipsg_status guarded(Fn&& fn) noexcept
{
    try {
        g_last_error.clear();
        g_last_line = 0;
        fn();
        return IPSG_OK;
    } catch (const ipsg::Error& e) {
        return fail(status_of(e.code()), e.what(), e.line());
    } catch (const std::bad_alloc&) {
        return fail(IPSG_E_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(IPSG_E_INTERNAL, e.what());
    } catch (...) {
        return fail(IPSG_E_INTERNAL, "unknown error");
    }
}

template <typename T>
void require(const T* p, const char* what)
{
    if (p == nullptr) throw ipsg::InvalidArgument(std::string(what) + " must not be NULL");
}

ipsg::Digest digest_arg(const char* hex)
{
    require(hex, "digest");
    const auto d = ipsg::Digest::from_hex(hex);
    if (!d) throw ipsg::InvalidArgument("digest must be 64 hex characters");
    return *d;
}

ipsg::SignatureKind kind_arg(ipsg_kind kind)
{
    switch (kind) {
    case IPSG_KIND_AGENT_TOKEN: return ipsg::SignatureKind::AgentToken;
    case IPSG_KIND_FILE_CONTENT: return ipsg::SignatureKind::FileContent;
    }
    throw ipsg::InvalidArgument("unknown signature kind");
}

ipsg::Scope scope_arg(const char* scope) { return scope == nullptr ? ipsg::Scope::global() : ipsg::Scope::parse(scope); }

ipsg::Scope principal_arg(const char* name)
{
    require(name, "principal");
    return ipsg::Scope::principal(name);
}

char* dup_string(const std::string& s)
{
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (out == nullptr) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void copy_hex(const ipsg::Digest& d, char out[65])
{
    const std::string hex = d.hex();
    std::memcpy(out, hex.c_str(), 65);
}

// "name=value;name=value" with integer or "quoted" values.
ipsg::FieldMap parse_outcome(const char* text)
{
    ipsg::FieldMap out;
    if (text == nullptr) return out;
    std::string_view rest(text);
    while (!rest.empty()) {
        const auto semi = rest.find(';');
        const std::string_view item = rest.substr(0, semi);
        rest = semi == std::string_view::npos ? std::string_view{} : rest.substr(semi + 1);
        if (item.empty()) continue;
        const auto eq = item.find('=');
        if (eq == std::string_view::npos || eq == 0) throw ipsg::InvalidArgument("outcome items must be name=value");
        const std::string name(item.substr(0, eq));
        const std::string_view value = item.substr(eq + 1);
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
            out[name] = std::string(value.substr(1, value.size() - 2));
            continue;
        }
        std::int64_t v = 0;
        const auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
        if (value.empty() || ec != std::errc() || p != value.data() + value.size()) {
            throw ipsg::InvalidArgument("outcome value for '" + name + "' must be an integer or quoted text");
        }
        out[name] = v;
    }
    return out;
}

}  // namespace

extern "C" {

IPSG_API const char* ipsg_status_name(ipsg_status status)
{
    switch (status) {
    case IPSG_OK: return "OK";
    case IPSG_E_INVALID_ARGUMENT: return "InvalidArgument";
    case IPSG_E_POLICY: return "PolicyError";
    case IPSG_E_IO: return "IoError";
    case IPSG_E_FORMAT: return "FormatError";
    case IPSG_E_INTEGRITY: return "IntegrityError";
    case IPSG_E_VERSION: return "VersionError";
    case IPSG_E_DUPLICATE_KEY: return "DuplicateKeyError";
    case IPSG_E_CHAIN: return "ChainError";
    case IPSG_E_DOMAIN: return "DomainError";
    case IPSG_E_SCENARIO: return "ScenarioError";
    case IPSG_E_TRACE: return "TraceError";
    case IPSG_E_NOT_FLAGGED: return "NotFlaggedError";
    case IPSG_E_EXPIRED_CHALLENGE: return "ExpiredChallengeError";
    case IPSG_E_INTERNAL: return "InternalError";
    }
    return "UnknownStatus";
}

IPSG_API const char* ipsg_last_error(void) { return g_last_error.c_str(); }

IPSG_API size_t ipsg_last_error_line(void) { return g_last_line; }

IPSG_API void ipsg_string_free(char* s) { std::free(s); }

IPSG_API ipsg_status ipsg_sha256_hex(const void* data, size_t size, char out_hex[65])
{
    return guarded([&] {
        if (size > 0) require(data, "data");
        require(out_hex, "out_hex");
        copy_hex(ipsg::sha256(std::string_view(static_cast<const char*>(data), size)), out_hex);
    });
}

// ---- engine -------------------------------------------------------------

IPSG_API ipsg_status ipsg_engine_create(const char* rule, uint32_t min_compliant, uint64_t threshold_num,
                                        uint64_t threshold_den, ipsg_engine** out)
{
    return guarded([&] {
        require(out, "out");
        ipsg::TrustPolicy policy;
        policy.rule = ipsg::ComplianceRule::parse(rule == nullptr ? "" : rule);
        policy.min_compliant = min_compliant;
        policy.quotient_threshold = ipsg::Ratio(threshold_num, threshold_den);
        *out = new ipsg_engine{ipsg::PrivilegeEngine(std::move(policy))};
    });
}

IPSG_API ipsg_status ipsg_engine_create_scanner(ipsg_engine** out)
{
    return guarded([&] {
        require(out, "out");
        *out = new ipsg_engine{ipsg::PrivilegeEngine(ipsg::scan::scan_policy())};
    });
}

IPSG_API void ipsg_engine_destroy(ipsg_engine* engine) { delete engine; }

IPSG_API ipsg_status ipsg_engine_load(ipsg_engine* engine, const char* path)
{
    return guarded([&] {
        require(engine, "engine");
        require(path, "path");
        engine->engine.restore(ipsg::load_store_or_empty(path));
    });
}

IPSG_API ipsg_status ipsg_engine_save(const ipsg_engine* engine, const char* path)
{
    return guarded([&] {
        require(engine, "engine");
        require(path, "path");
        const auto records = engine->engine.records();
        ipsg::save_store(records, path);
    });
}

IPSG_API size_t ipsg_engine_record_count(const ipsg_engine* engine)
{
    return engine == nullptr ? 0 : engine->engine.size();
}

IPSG_API ipsg_status ipsg_engine_is_trusted(const ipsg_engine* engine, const char* digest_hex, ipsg_kind kind,
                                            const char* scope, int* trusted)
{
    return guarded([&] {
        require(engine, "engine");
        require(trusted, "trusted");
        const ipsg::EntitySignature sig{digest_arg(digest_hex), kind_arg(kind), {}};
        *trusted = engine->engine.is_trusted(sig, scope_arg(scope)) ? 1 : 0;
    });
}

IPSG_API ipsg_status ipsg_engine_classify(const ipsg_engine* engine, const char* digest_hex, ipsg_kind kind,
                                          const char* scope, int* suppressed)
{
    return guarded([&] {
        require(engine, "engine");
        require(suppressed, "suppressed");
        ipsg::Observation obs;
        obs.signature = ipsg::EntitySignature{digest_arg(digest_hex), kind_arg(kind), {}};
        *suppressed = engine->engine.classify(obs, scope_arg(scope), "react").suppressed() ? 1 : 0;
    });
}

IPSG_API ipsg_status ipsg_engine_record_outcome(ipsg_engine* engine, const char* digest_hex, ipsg_kind kind,
                                                const char* label, const char* scope, const char* outcome,
                                                uint64_t start_tick, uint64_t end_tick, ipsg_decision* decision,
                                                uint64_t* quotient_num, uint64_t* quotient_den)
{
    return guarded([&] {
        require(engine, "engine");
        ipsg::Episode ep;
        ep.signature = ipsg::EntitySignature::make(digest_arg(digest_hex), kind_arg(kind), label ? label : "");
        ep.scope = scope_arg(scope);
        ep.outcome = parse_outcome(outcome);
        ep.start_tick = start_tick;
        ep.end_tick = end_tick;
        const ipsg::TrustDecision d = engine->engine.record_outcome(ep);
        if (decision != nullptr) {
            *decision = d.kind == ipsg::TrustDecision::Kind::Granted   ? IPSG_DECISION_GRANTED
                        : d.kind == ipsg::TrustDecision::Kind::Pending ? IPSG_DECISION_PENDING
                                                                       : IPSG_DECISION_NON_COMPLIANT;
        }
        if (quotient_num != nullptr) *quotient_num = d.quotient.num();
        if (quotient_den != nullptr) *quotient_den = d.quotient.den();
    });
}

IPSG_API ipsg_status ipsg_engine_revoke(ipsg_engine* engine, const char* digest_hex, ipsg_kind kind,
                                        const char* scope, int* revoked)
{
    return guarded([&] {
        require(engine, "engine");
        const ipsg::EntitySignature sig{digest_arg(digest_hex), kind_arg(kind), {}};
        const bool r = engine->engine.revoke(sig, scope_arg(scope));
        if (revoked != nullptr) *revoked = r ? 1 : 0;
    });
}

IPSG_API ipsg_status ipsg_engine_revoke_digest(ipsg_engine* engine, const char* digest_hex, const char* scope,
                                               int* revoked)
{
    return guarded([&] {
        require(engine, "engine");
        const ipsg::Digest digest = digest_arg(digest_hex);
        const ipsg::Scope sc = scope_arg(scope);
        bool any = false;
        for (const auto kind : {ipsg::SignatureKind::AgentToken, ipsg::SignatureKind::FileContent}) {
            any = engine->engine.revoke(ipsg::EntitySignature{digest, kind, {}}, sc) || any;
        }
        if (revoked != nullptr) *revoked = any ? 1 : 0;
    });
}

IPSG_API ipsg_status ipsg_engine_list(const ipsg_engine* engine, const char* scope_filter, char** out_text)
{
    return guarded([&] {
        require(engine, "engine");
        require(out_text, "out_text");
        std::optional<ipsg::Scope> filter;
        if (scope_filter != nullptr) filter = ipsg::Scope::parse(scope_filter);
        auto records = engine->engine.records();
        std::stable_sort(records.begin(), records.end(), [](const ipsg::TrustRecord& a, const ipsg::TrustRecord& b) {
            const std::string sa = a.scope.render();
            const std::string sb = b.scope.render();
            if (sa != sb) return sa < sb;
            return a.signature.digest < b.signature.digest;
        });
        std::string text;
        for (const auto& r : records) {
            if (filter && r.scope != *filter) continue;
            text += r.scope.render() + ' ' + r.signature.digest.hex() + ' ' + ipsg::to_string(r.signature.kind) + ' ' +
                    std::to_string(r.compliant_count) + ' ' + std::to_string(r.total_count) + ' ' +
                    (r.granted ? "GRANTED" : "PENDING") + ' ' +
                    (r.granted_tick ? std::to_string(*r.granted_tick) : "-") + ' ' + r.signature.label + '\n';
        }
        *out_text = dup_string(text);
    });
}

// ---- audit --------------------------------------------------------------

IPSG_API ipsg_status ipsg_audit_append(const char* path, uint64_t tick, ipsg_event event, const char* digest_hex,
                                       const char* scope)
{
    return guarded([&] {
        require(path, "path");
        ipsg::AuditEvent ev;
        switch (event) {
        case IPSG_EVENT_GRANT: ev = ipsg::AuditEvent::Grant; break;
        case IPSG_EVENT_REVOKE: ev = ipsg::AuditEvent::Revoke; break;
        case IPSG_EVENT_SUPPRESS: ev = ipsg::AuditEvent::Suppress; break;
        case IPSG_EVENT_REACT: ev = ipsg::AuditEvent::React; break;
        default: throw ipsg::InvalidArgument("unknown audit event");
        }
        ipsg::append_audit(path, ipsg::AuditEntry{tick, ev, digest_arg(digest_hex), scope_arg(scope)});
    });
}

IPSG_API ipsg_status ipsg_audit_verify(const char* path, int* valid, uint64_t* line)
{
    return guarded([&] {
        require(path, "path");
        require(valid, "valid");
        require(line, "line");
        const ipsg::AuditVerdict v = ipsg::verify_audit(path);
        *valid = v.valid ? 1 : 0;
        *line = v.valid ? v.line_count : v.first_bad_line;
    });
}

// ---- simulator ----------------------------------------------------------

IPSG_API ipsg_status ipsg_scenario_parse(const char* text, uint64_t seed, ipsg_scenario** out)
{
    return guarded([&] {
        require(text, "text");
        require(out, "out");
        *out = new ipsg_scenario{ipsg::sim::parse_scenario(text, seed)};
    });
}

IPSG_API ipsg_status ipsg_scenario_load(const char* path, uint64_t seed, ipsg_scenario** out)
{
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = new ipsg_scenario{ipsg::sim::parse_scenario(ipsg::read_file(path), seed)};
    });
}

IPSG_API void ipsg_scenario_destroy(ipsg_scenario* scenario) { delete scenario; }

IPSG_API uint64_t ipsg_scenario_ticks(const ipsg_scenario* scenario)
{
    return scenario == nullptr ? 0 : scenario->scenario.ticks;
}

IPSG_API ipsg_status ipsg_scenario_create_engine(const ipsg_scenario* scenario, ipsg_engine** out)
{
    return guarded([&] {
        require(scenario, "scenario");
        require(out, "out");
        *out = new ipsg_engine{ipsg::PrivilegeEngine(ipsg::sim::sim_policy(scenario->scenario.config))};
    });
}

IPSG_API ipsg_status ipsg_sim_run(const ipsg_scenario* scenario, ipsg_engine* engine, uint64_t ticks,
                                  ipsg_sim_result** out)
{
    return guarded([&] {
        require(scenario, "scenario");
        require(engine, "engine");
        require(out, "out");
        ipsg::sim::World world = scenario->scenario.world;
        auto result = ipsg::sim::run_scenario(world, scenario->scenario.config, engine->engine,
                                              ticks == 0 ? scenario->scenario.ticks : ticks);
        *out = new ipsg_sim_result{std::move(result)};
    });
}

IPSG_API const char* ipsg_sim_result_trace(const ipsg_sim_result* result)
{
    return result == nullptr ? "" : result->result.trace.c_str();
}

IPSG_API size_t ipsg_sim_result_grant_count(const ipsg_sim_result* result)
{
    return result == nullptr ? 0 : result->result.grants.size();
}

IPSG_API ipsg_status ipsg_sim_result_grant(const ipsg_sim_result* result, size_t index, uint64_t* tick,
                                           char digest_hex[65])
{
    return guarded([&] {
        require(result, "result");
        if (index >= result->result.grants.size()) throw ipsg::InvalidArgument("grant index out of range");
        const auto& g = result->result.grants[index];
        if (tick != nullptr) *tick = g.tick;
        if (digest_hex != nullptr) copy_hex(g.signature.digest, digest_hex);
    });
}

IPSG_API void ipsg_sim_result_destroy(ipsg_sim_result* result) { delete result; }

IPSG_API ipsg_status ipsg_check_failsafe(const ipsg_scenario* scenario, const char* trace, int* holds,
                                         uint64_t* first_tick)
{
    return guarded([&] {
        require(scenario, "scenario");
        require(trace, "trace");
        require(holds, "holds");
        const auto v = ipsg::sim::check_failsafe(trace, ipsg::sim::sensor_ranges(scenario->scenario.world));
        *holds = v.holds ? 1 : 0;
        if (first_tick != nullptr) *first_tick = v.first_tick;
    });
}

IPSG_API ipsg_status ipsg_within_return_window(int64_t x0, int64_t y0, int64_t x, int64_t y, int* inside)
{
    return guarded([&] {
        require(inside, "inside");
        *inside = ipsg::sim::within_return_window({x0, y0}, {x, y}) ? 1 : 0;
    });
}

// ---- scanner ------------------------------------------------------------

IPSG_API ipsg_status ipsg_sigdb_load(const char* path, ipsg_sigdb** out)
{
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = new ipsg_sigdb{ipsg::scan::SignatureDb::load(path)};
    });
}

IPSG_API ipsg_status ipsg_sigdb_save(const ipsg_sigdb* db, const char* path)
{
    return guarded([&] {
        require(db, "db");
        require(path, "path");
        db->db.save(path);
    });
}

IPSG_API size_t ipsg_sigdb_count(const ipsg_sigdb* db) { return db == nullptr ? 0 : db->db.signatures().size(); }

IPSG_API void ipsg_sigdb_destroy(ipsg_sigdb* db) { delete db; }

IPSG_API ipsg_status ipsg_userdb_load(const char* path, ipsg_userdb** out)
{
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = new ipsg_userdb{ipsg::scan::UserDb::load(path)};
    });
}

IPSG_API void ipsg_userdb_destroy(ipsg_userdb* db) { delete db; }

IPSG_API ipsg_status ipsg_verify_credentials(const ipsg_userdb* db, const char* name, const char* password, int* ok)
{
    return guarded([&] {
        require(db, "db");
        require(name, "name");
        require(password, "password");
        require(ok, "ok");
        *ok = ipsg::scan::verify_credentials(db->db, name, password) ? 1 : 0;
    });
}

IPSG_API ipsg_status ipsg_scan(const char* const* paths, size_t path_count, const ipsg_sigdb* db,
                               const ipsg_engine* engine, const char* principal, ipsg_report** out)
{
    return guarded([&] {
        if (path_count > 0) require(paths, "paths");
        require(db, "db");
        require(engine, "engine");
        require(out, "out");
        std::vector<std::filesystem::path> list;
        list.reserve(path_count);
        for (size_t i = 0; i < path_count; ++i) {
            require(paths[i], "path");
            list.emplace_back(paths[i]);
        }
        *out = new ipsg_report{ipsg::scan::scan(list, db->db, engine->engine, principal_arg(principal))};
    });
}

IPSG_API size_t ipsg_report_entry_count(const ipsg_report* report)
{
    return report == nullptr ? 0 : report->report.entries.size();
}

IPSG_API size_t ipsg_report_flagged_count(const ipsg_report* report)
{
    return report == nullptr ? 0 : report->report.flagged_count();
}

IPSG_API size_t ipsg_report_trusted_count(const ipsg_report* report)
{
    return report == nullptr ? 0 : report->report.trusted_count();
}

IPSG_API ipsg_status ipsg_report_entry(const ipsg_report* report, size_t index, ipsg_entry_info* info)
{
    return guarded([&] {
        require(report, "report");
        require(info, "info");
        if (index >= report->report.entries.size()) throw ipsg::InvalidArgument("entry index out of range");
        const auto& entry = report->report.entries[index];
        if (const auto* f = std::get_if<ipsg::scan::ScanFinding>(&entry)) {
            info->path = f->path.c_str();
            info->signature = f->matched.c_str();
            copy_hex(f->content_digest, info->digest_hex);
            info->disposition = f->disposition == ipsg::scan::Disposition::Flagged ? IPSG_FLAGGED : IPSG_TRUSTED;
        } else {
            info->path = std::get<ipsg::scan::ReadFailure>(entry).path.c_str();
            info->signature = "";
            info->digest_hex[0] = '\0';
            info->disposition = IPSG_READ_ERROR;
        }
    });
}

IPSG_API ipsg_status ipsg_report_render(const ipsg_report* report, char** out_text)
{
    return guarded([&] {
        require(report, "report");
        require(out_text, "out_text");
        *out_text = dup_string(report->report.render());
    });
}

IPSG_API void ipsg_report_destroy(ipsg_report* report) { delete report; }

IPSG_API ipsg_status ipsg_session_create(uint64_t seed, ipsg_session** out)
{
    return guarded([&] {
        require(out, "out");
        *out = new ipsg_session{ipsg::scan::ChallengeIssuer(seed)};
    });
}

IPSG_API void ipsg_session_destroy(ipsg_session* session) { delete session; }

IPSG_API ipsg_status ipsg_challenge_issue(ipsg_session* session, const ipsg_report* report, size_t index,
                                          const char* principal, ipsg_challenge** out)
{
    return guarded([&] {
        require(session, "session");
        require(report, "report");
        require(out, "out");
        if (index >= report->report.entries.size()) throw ipsg::InvalidArgument("entry index out of range");
        const auto* finding = std::get_if<ipsg::scan::ScanFinding>(&report->report.entries[index]);
        if (finding == nullptr) throw ipsg::NotFlaggedError("entry is a read error, not a finding");
        *out = new ipsg_challenge{session->issuer.issue(*finding, principal_arg(principal))};
    });
}

IPSG_API const char* ipsg_challenge_token(const ipsg_challenge* challenge)
{
    return challenge == nullptr ? "" : challenge->challenge.token.c_str();
}

IPSG_API void ipsg_challenge_destroy(ipsg_challenge* challenge) { delete challenge; }

IPSG_API ipsg_status ipsg_challenge_answer(ipsg_session* session, const ipsg_challenge* challenge,
                                           const char* token, const char* user, const char* password,
                                           const ipsg_userdb* users, ipsg_engine* engine, ipsg_sigdb* literal_db,
                                           int* granted, const char** reason)
{
    return guarded([&] {
        require(session, "session");
        require(challenge, "challenge");
        require(users, "users");
        require(engine, "engine");
        require(granted, "granted");
        const auto outcome = session->issuer.answer(challenge->challenge, token ? token : "", user ? user : "",
                                                    password ? password : "", users->db, engine->engine,
                                                    literal_db ? &literal_db->db : nullptr);
        *granted = outcome.granted ? 1 : 0;
        if (reason != nullptr) *reason = outcome.granted ? "" : ipsg::scan::to_string(outcome.reason);
    });
}

}  // extern "C"
