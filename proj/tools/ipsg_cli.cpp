// ipsg: command-line front end over the C API.
//
//   ipsg sim run <scenario> [--seed N] [--trace PATH] [--trust PATH] [--check-failsafe]
//   ipsg scan <path>... --sigdb PATH --trust PATH --user NAME [--users PATH]
//             [--interactive] [--seed N] [--report PATH] [--literal-db-removal]
//   ipsg trust list --trust PATH [--user NAME]
//   ipsg trust revoke --trust PATH --digest HEX64 [--user NAME]
//   ipsg audit verify --log PATH
//
// Exit codes: 0 success, 1 scan flagged something, 2 usage or runtime error,
// 3 integrity failure in the trust store or audit log.

#include <ipsg/ipsg.h>

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFlagged = 1;
constexpr int kExitError = 2;
constexpr int kExitIntegrity = 3;

struct Failure {
    ipsg_status status;
    std::string context;
};

void check(ipsg_status s, const std::string& context)
{
    if (s != IPSG_OK) throw Failure{s, context};
}

template <typename T, void (*Destroy)(T*)>
struct Deleter {
    void operator()(T* p) const { Destroy(p); }
};

using Engine = std::unique_ptr<ipsg_engine, Deleter<ipsg_engine, ipsg_engine_destroy>>;
using Scenario = std::unique_ptr<ipsg_scenario, Deleter<ipsg_scenario, ipsg_scenario_destroy>>;
using SimResult = std::unique_ptr<ipsg_sim_result, Deleter<ipsg_sim_result, ipsg_sim_result_destroy>>;
using SigDb = std::unique_ptr<ipsg_sigdb, Deleter<ipsg_sigdb, ipsg_sigdb_destroy>>;
using UserDb = std::unique_ptr<ipsg_userdb, Deleter<ipsg_userdb, ipsg_userdb_destroy>>;
using Report = std::unique_ptr<ipsg_report, Deleter<ipsg_report, ipsg_report_destroy>>;
using Session = std::unique_ptr<ipsg_session, Deleter<ipsg_session, ipsg_session_destroy>>;
using Challenge = std::unique_ptr<ipsg_challenge, Deleter<ipsg_challenge, ipsg_challenge_destroy>>;

std::string take_string(char* s)
{
    std::string out = s == nullptr ? "" : s;
    ipsg_string_free(s);
    return out;
}

std::uint64_t wall_clock()
{
    using namespace std::chrono;
    return static_cast<std::uint64_t>(duration_cast<seconds>(system_clock::now().time_since_epoch()).count());
}

void write_text(const std::string& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out || !(out << text) || !out.flush()) throw Failure{IPSG_E_IO, "cannot write " + path};
}

std::string audit_path_for(const std::string& trust, const std::string& audit)
{
    return audit.empty() ? trust + ".audit" : audit;
}

struct SimOptions {
    std::string scenario;
    std::uint64_t seed = 0;
    std::string trace;
    std::string trust;
    std::string audit;
    bool check_failsafe = false;
};

int run_sim(const SimOptions& o)
{
    ipsg_scenario* raw_scn = nullptr;
    check(ipsg_scenario_load(o.scenario.c_str(), o.seed, &raw_scn), o.scenario);
    const Scenario scn(raw_scn);

    ipsg_engine* raw_engine = nullptr;
    check(ipsg_scenario_create_engine(scn.get(), &raw_engine), "engine");
    const Engine engine(raw_engine);
    if (!o.trust.empty()) check(ipsg_engine_load(engine.get(), o.trust.c_str()), o.trust);

    ipsg_sim_result* raw_result = nullptr;
    check(ipsg_sim_run(scn.get(), engine.get(), 0, &raw_result), "simulation");
    const SimResult result(raw_result);
    const std::string trace = ipsg_sim_result_trace(result.get());

    if (o.trace.empty()) {
        std::cout << trace;
    } else {
        write_text(o.trace, trace);
    }

    if (!o.trust.empty()) {
        check(ipsg_engine_save(engine.get(), o.trust.c_str()), o.trust);
        const std::string log = audit_path_for(o.trust, o.audit);
        for (std::size_t i = 0; i < ipsg_sim_result_grant_count(result.get()); ++i) {
            std::uint64_t tick = 0;
            char digest[65];
            check(ipsg_sim_result_grant(result.get(), i, &tick, digest), "grant");
            check(ipsg_audit_append(log.c_str(), tick, IPSG_EVENT_GRANT, digest, nullptr), log);
        }
    }

    if (o.check_failsafe) {
        int holds = 0;
        std::uint64_t tick = 0;
        check(ipsg_check_failsafe(scn.get(), trace.c_str(), &holds, &tick), "failsafe check");
        std::ostream& out = o.trace.empty() ? std::cerr : std::cout;
        if (holds) {
            out << "FAILSAFE HOLDS\n";
        } else {
            out << "FAILSAFE VIOLATED " << tick << '\n';
        }
    }
    return kExitOk;
}

struct ScanOptions {
    std::vector<std::string> paths;
    std::string sigdb;
    std::string trust;
    std::string audit;
    std::string user;
    std::string users;
    std::string report;
    std::uint64_t seed = 0;
    bool interactive = false;
    bool literal = false;
};

int run_scan(const ScanOptions& o)
{
    ipsg_sigdb* raw_db = nullptr;
    check(ipsg_sigdb_load(o.sigdb.c_str(), &raw_db), o.sigdb);
    const SigDb db(raw_db);

    ipsg_engine* raw_engine = nullptr;
    check(ipsg_engine_create_scanner(&raw_engine), "engine");
    const Engine engine(raw_engine);
    check(ipsg_engine_load(engine.get(), o.trust.c_str()), o.trust);

    std::vector<const char*> paths;
    for (const auto& p : o.paths) paths.push_back(p.c_str());
    ipsg_report* raw_report = nullptr;
    check(ipsg_scan(paths.data(), paths.size(), db.get(), engine.get(), o.user.c_str(), &raw_report), "scan");
    const Report report(raw_report);

    char* raw_text = nullptr;
    check(ipsg_report_render(report.get(), &raw_text), "report");
    const std::string text = take_string(raw_text);
    if (o.report.empty()) {
        std::cout << text << std::flush;
    } else {
        write_text(o.report, text);
    }
    const int code = ipsg_report_flagged_count(report.get()) > 0 ? kExitFlagged : kExitOk;
    if (!o.interactive) return code;

    ipsg_userdb* raw_users = nullptr;
    check(ipsg_userdb_load(o.users.c_str(), &raw_users), o.users);
    const UserDb users(raw_users);

    ipsg_session* raw_session = nullptr;
    check(ipsg_session_create(o.seed, &raw_session), "session");
    const Session session(raw_session);

    bool trust_changed = false;
    bool db_changed = false;
    std::set<std::string> settled;  // digests (default) or signature names (literal)
    const std::string log = audit_path_for(o.trust, o.audit);

    for (std::size_t i = 0; i < ipsg_report_entry_count(report.get()); ++i) {
        ipsg_entry_info info;
        check(ipsg_report_entry(report.get(), i, &info), "report entry");
        if (info.disposition != IPSG_FLAGGED) continue;
        const std::string key = o.literal ? std::string(info.signature) : std::string(info.digest_hex);
        if (settled.contains(key)) continue;

        ipsg_challenge* raw_challenge = nullptr;
        check(ipsg_challenge_issue(session.get(), report.get(), i, o.user.c_str(), &raw_challenge), "challenge");
        const Challenge challenge(raw_challenge);
        std::cout << "THREAT " << info.path << ' ' << info.signature << " CAPTCHA " << ipsg_challenge_token(challenge.get())
                  << std::endl;

        std::string line;
        if (!std::getline(std::cin, line)) break;
        std::istringstream words(line);
        std::string token, name, password;
        words >> token >> name >> password;

        int granted = 0;
        const char* reason = "";
        check(ipsg_challenge_answer(session.get(), challenge.get(), token.c_str(), name.c_str(), password.c_str(),
                                    users.get(), engine.get(), o.literal ? db.get() : nullptr, &granted, &reason),
              "challenge answer");
        if (!granted) {
            std::cout << "REJECTED " << info.path << ' ' << reason << std::endl;
            continue;
        }
        settled.insert(key);
        std::cout << "GRANTED " << info.path << std::endl;
        if (o.literal) {
            db_changed = true;
        } else {
            trust_changed = true;
            check(ipsg_audit_append(log.c_str(), wall_clock(), IPSG_EVENT_GRANT, info.digest_hex, o.user.c_str()), log);
        }
    }

    if (trust_changed) check(ipsg_engine_save(engine.get(), o.trust.c_str()), o.trust);
    if (db_changed) check(ipsg_sigdb_save(db.get(), o.sigdb.c_str()), o.sigdb);
    return code;
}

int run_trust_list(const std::string& trust, const std::string& user)
{
    ipsg_engine* raw = nullptr;
    check(ipsg_engine_create(nullptr, 1, 0, 1, &raw), "engine");
    const Engine engine(raw);
    check(ipsg_engine_load(engine.get(), trust.c_str()), trust);
    char* text = nullptr;
    check(ipsg_engine_list(engine.get(), user.empty() ? nullptr : user.c_str(), &text), "list");
    std::cout << take_string(text);
    return kExitOk;
}

int run_trust_revoke(const std::string& trust, const std::string& audit, const std::string& digest,
                     const std::string& user)
{
    ipsg_engine* raw = nullptr;
    check(ipsg_engine_create(nullptr, 1, 0, 1, &raw), "engine");
    const Engine engine(raw);
    check(ipsg_engine_load(engine.get(), trust.c_str()), trust);
    const char* scope = user.empty() ? nullptr : user.c_str();
    int revoked = 0;
    check(ipsg_engine_revoke_digest(engine.get(), digest.c_str(), scope, &revoked), "revoke");
    const std::string scope_text = user.empty() ? "-" : user;
    if (!revoked) {
        std::cout << "NOT_GRANTED " << digest << ' ' << scope_text << '\n';
        return kExitOk;
    }
    check(ipsg_engine_save(engine.get(), trust.c_str()), trust);
    const std::string log = audit_path_for(trust, audit);
    check(ipsg_audit_append(log.c_str(), wall_clock(), IPSG_EVENT_REVOKE, digest.c_str(), scope), log);
    std::cout << "REVOKED " << digest << ' ' << scope_text << '\n';
    return kExitOk;
}

int run_audit_verify(const std::string& log)
{
    int valid = 0;
    std::uint64_t line = 0;
    check(ipsg_audit_verify(log.c_str(), &valid, &line), log);
    if (valid) {
        std::cout << "VALID " << line << '\n';
        return kExitOk;
    }
    std::cout << "INVALID " << line << '\n';
    return kExitIntegrity;
}

int exit_code_for(ipsg_status s)
{
    return s == IPSG_E_INTEGRITY || s == IPSG_E_CHAIN ? kExitIntegrity : kExitError;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Trust-acquisition toolkit: guard-robot simulator and signature scanner", "ipsg"};
    app.require_subcommand(1);

    SimOptions sim;
    auto* sim_cmd = app.add_subcommand("sim", "Guard-robot simulator");
    sim_cmd->require_subcommand(1);
    auto* sim_run = sim_cmd->add_subcommand("run", "Run a scenario and emit its trace");
    sim_run->add_option("scenario", sim.scenario, "Scenario file")->required();
    sim_run->add_option("--seed", sim.seed, "Simulation seed");
    sim_run->add_option("--trace", sim.trace, "Write the trace here instead of stdout");
    sim_run->add_option("--trust", sim.trust, "Trust store to load and update")->envname("IPSG_TRUST_DB");
    sim_run->add_option("--audit", sim.audit, "Audit log (default: <trust>.audit)");
    sim_run->add_flag("--check-failsafe", sim.check_failsafe, "Report whether some bot kept the ball in range");

    ScanOptions scan;
    auto* scan_cmd = app.add_subcommand("scan", "Scan files against a signature database");
    scan_cmd->add_option("paths", scan.paths, "Files to scan")->required();
    scan_cmd->add_option("--sigdb", scan.sigdb, "Signature database")->required();
    scan_cmd->add_option("--trust", scan.trust, "Trust store")->envname("IPSG_TRUST_DB")->required();
    scan_cmd->add_option("--audit", scan.audit, "Audit log (default: <trust>.audit)");
    scan_cmd->add_option("--user", scan.user, "Scanning principal")->required();
    scan_cmd->add_option("--users", scan.users, "User database for challenge answers");
    scan_cmd->add_flag("--interactive", scan.interactive, "Challenge each flagged file on stdin/stdout");
    scan_cmd->add_option("--seed", scan.seed, "Challenge token seed");
    scan_cmd->add_option("--report", scan.report, "Write the report here instead of stdout");
    scan_cmd->add_flag("--literal-db-removal", scan.literal, "Delete confirmed signatures from the database");

    std::string trust_path, audit_path, trust_user, digest;
    auto* trust_cmd = app.add_subcommand("trust", "Inspect or edit the trust store");
    trust_cmd->require_subcommand(1);
    auto* trust_list = trust_cmd->add_subcommand("list", "List trust records");
    trust_list->add_option("--trust", trust_path, "Trust store")->envname("IPSG_TRUST_DB")->required();
    trust_list->add_option("--user", trust_user, "Only this principal");
    auto* trust_revoke = trust_cmd->add_subcommand("revoke", "Revoke a grant");
    trust_revoke->add_option("--trust", trust_path, "Trust store")->envname("IPSG_TRUST_DB")->required();
    trust_revoke->add_option("--audit", audit_path, "Audit log (default: <trust>.audit)");
    trust_revoke->add_option("--digest", digest, "64-hex digest")->required();
    trust_revoke->add_option("--user", trust_user, "Principal (default: global)");

    std::string log_path;
    auto* audit_cmd = app.add_subcommand("audit", "Audit log tools");
    audit_cmd->require_subcommand(1);
    auto* audit_verify = audit_cmd->add_subcommand("verify", "Verify the hash chain");
    audit_verify->add_option("--log", log_path, "Audit log")->required();

    if (argc <= 1) {
        std::cerr << app.help();
        return kExitError;
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        std::cout << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        std::cerr << "ipsg: " << e.what() << "\nRun with --help for usage.\n";
        return kExitError;
    }

    try {
        if (sim_run->parsed()) return run_sim(sim);
        if (scan_cmd->parsed()) {
            if (scan.interactive && scan.users.empty()) {
                std::cerr << "ipsg: --interactive needs --users\n";
                return kExitError;
            }
            return run_scan(scan);
        }
        if (trust_list->parsed()) return run_trust_list(trust_path, trust_user);
        if (trust_revoke->parsed()) return run_trust_revoke(trust_path, audit_path, digest, trust_user);
        if (audit_verify->parsed()) return run_audit_verify(log_path);
    } catch (const Failure& f) {
        std::cerr << "ipsg: " << f.context << ": " << ipsg_status_name(f.status);
        const std::string detail = ipsg_last_error();
        if (!detail.empty()) std::cerr << ": " << detail;
        std::cerr << '\n';
        return exit_code_for(f.status);
    }
    std::cerr << app.help();
    return kExitError;
}
