// Exercises the shared library through its C header only.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <ipsg/ipsg.h>

#include "corpus.hpp"
#include "temp_dir.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

using ipsg::testing::TempDir;

namespace {

const std::string kSource = IPSG_SOURCE_DIR;
const std::string kBlue = "a52b68595f0b1eb2c3e0aaa4a4673184561b9a4d7f73418744c1672825417f4f";

std::string take(char* s)
{
    std::string out = s;
    ipsg_string_free(s);
    return out;
}

std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string hex_sha(const std::string& text)
{
    char out[65];
    REQUIRE(ipsg_sha256_hex(text.data(), text.size(), out) == IPSG_OK);
    return out;
}

}  // namespace

TEST_CASE("status names and errors")
{
    CHECK(std::string(ipsg_status_name(IPSG_OK)) == "OK");
    CHECK(std::string(ipsg_status_name(IPSG_E_INTEGRITY)) == "IntegrityError");
    CHECK(std::string(ipsg_status_name(static_cast<ipsg_status>(1234))) == "UnknownStatus");

    ipsg_engine* e = nullptr;
    CHECK(ipsg_engine_create("returned = 1", 1, 0, 1, &e) == IPSG_E_POLICY);
    CHECK(e == nullptr);
    CHECK(std::strlen(ipsg_last_error()) > 0);
    CHECK(ipsg_engine_create("returned == 1", 0, 0, 1, &e) == IPSG_E_POLICY);
    CHECK(ipsg_engine_create("returned == 1", 1, 1, 0, &e) == IPSG_E_INVALID_ARGUMENT);
    CHECK(ipsg_engine_create("returned == 1", 1, 0, 1, nullptr) == IPSG_E_INVALID_ARGUMENT);
    REQUIRE(ipsg_engine_create("returned == 1", 1, 0, 1, &e) == IPSG_OK);
    CHECK(std::string(ipsg_last_error()).empty());
    ipsg_engine_destroy(e);
    ipsg_engine_destroy(nullptr);
}

TEST_CASE("sha256")
{
    CHECK(hex_sha("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(hex_sha("token:blue") == kBlue);
}

TEST_CASE("engine lifecycle")
{
    ipsg_engine* e = nullptr;
    REQUIRE(ipsg_engine_create("returned == 1", 1, 0, 1, &e) == IPSG_OK);
    int flag = -1;
    CHECK(ipsg_engine_classify(e, kBlue.c_str(), IPSG_KIND_AGENT_TOKEN, nullptr, &flag) == IPSG_OK);
    CHECK(flag == 0);

    ipsg_decision d;
    std::uint64_t num = 0, den = 0;
    CHECK(ipsg_engine_record_outcome(e, kBlue.c_str(), IPSG_KIND_AGENT_TOKEN, "blue", nullptr, "returned=0", 1, 2, &d, &num,
                                     &den) == IPSG_OK);
    CHECK(d == IPSG_DECISION_NON_COMPLIANT);
    CHECK(num == 0);
    CHECK(den == 1);
    CHECK(ipsg_engine_record_outcome(e, kBlue.c_str(), IPSG_KIND_AGENT_TOKEN, "blue", "-", "returned=1;who=\"maint\"", 3, 4,
                                     &d, &num, &den) == IPSG_OK);
    CHECK(d == IPSG_DECISION_GRANTED);
    CHECK(num == 1);
    CHECK(den == 2);
    CHECK(ipsg_engine_classify(e, kBlue.c_str(), IPSG_KIND_AGENT_TOKEN, nullptr, &flag) == IPSG_OK);
    CHECK(flag == 1);
    CHECK(ipsg_engine_is_trusted(e, kBlue.c_str(), IPSG_KIND_AGENT_TOKEN, "alice", &flag) == IPSG_OK);
    CHECK(flag == 0);
    CHECK(ipsg_engine_is_trusted(e, kBlue.c_str(), IPSG_KIND_FILE_CONTENT, nullptr, &flag) == IPSG_OK);
    CHECK(flag == 0);

    CHECK(ipsg_engine_record_outcome(e, kBlue.c_str(), IPSG_KIND_AGENT_TOKEN, "", nullptr, "other=1", 5, 5, &d, &num, &den) ==
          IPSG_E_POLICY);
    CHECK(ipsg_engine_record_outcome(e, "xyz", IPSG_KIND_AGENT_TOKEN, "", nullptr, "returned=1", 5, 5, &d, &num, &den) ==
          IPSG_E_INVALID_ARGUMENT);
    CHECK(ipsg_engine_record_outcome(e, kBlue.c_str(), IPSG_KIND_AGENT_TOKEN, "", nullptr, "returned", 5, 5, &d, &num, &den) ==
          IPSG_E_INVALID_ARGUMENT);
    CHECK(ipsg_engine_record_outcome(e, kBlue.c_str(), IPSG_KIND_AGENT_TOKEN, "", "bad scope", "returned=1", 5, 5, &d, &num,
                                     &den) == IPSG_E_INVALID_ARGUMENT);
    CHECK(ipsg_engine_record_outcome(e, kBlue.c_str(), IPSG_KIND_AGENT_TOKEN, "", nullptr, "returned=1", 6, 5, &d, &num,
                                     &den) == IPSG_E_INVALID_ARGUMENT);
    CHECK(ipsg_engine_record_count(e) == 1);

    char* text = nullptr;
    REQUIRE(ipsg_engine_list(e, nullptr, &text) == IPSG_OK);
    CHECK(take(text) == "- " + kBlue + " AgentToken 1 2 GRANTED 4 blue\n");

    int revoked = -1;
    CHECK(ipsg_engine_revoke(e, kBlue.c_str(), IPSG_KIND_FILE_CONTENT, nullptr, &revoked) == IPSG_OK);
    CHECK(revoked == 0);
    CHECK(ipsg_engine_revoke_digest(e, kBlue.c_str(), nullptr, &revoked) == IPSG_OK);
    CHECK(revoked == 1);
    CHECK(ipsg_engine_revoke(e, kBlue.c_str(), IPSG_KIND_AGENT_TOKEN, nullptr, &revoked) == IPSG_OK);
    CHECK(revoked == 0);
    REQUIRE(ipsg_engine_list(e, "-", &text) == IPSG_OK);
    CHECK(take(text) == "- " + kBlue + " AgentToken 1 2 PENDING - blue\n");
    REQUIRE(ipsg_engine_list(e, "alice", &text) == IPSG_OK);
    CHECK(take(text).empty());
    ipsg_engine_destroy(e);
}

TEST_CASE("list is sorted by scope then digest")
{
    ipsg_engine* e = nullptr;
    REQUIRE(ipsg_engine_create("ok == 1", 1, 0, 1, &e) == IPSG_OK);
    const std::string d1 = hex_sha("1"), d2 = hex_sha("2");
    ipsg_decision d;
    std::uint64_t n, m;
    for (const char* scope : {"zed", "alice", "-"}) {
        for (const auto* dg : {&d2, &d1}) {
            REQUIRE(ipsg_engine_record_outcome(e, dg->c_str(), IPSG_KIND_FILE_CONTENT, "", scope, "ok=1", 0, 0, &d, &n, &m) ==
                    IPSG_OK);
        }
    }
    char* text = nullptr;
    REQUIRE(ipsg_engine_list(e, nullptr, &text) == IPSG_OK);
    std::istringstream lines(take(text));
    std::vector<std::pair<std::string, std::string>> keys;
    for (std::string l; std::getline(lines, l);) keys.emplace_back(l.substr(0, l.find(' ')), l.substr(l.find(' ') + 1, 64));
    REQUIRE(keys.size() == 6);
    CHECK(std::is_sorted(keys.begin(), keys.end()));
    CHECK(keys.front().first == "-");
    ipsg_engine_destroy(e);
}

TEST_CASE("persistence through the C API")
{
    TempDir dir;
    const std::string path = (dir / "t.db").string();
    ipsg_engine* e = nullptr;
    REQUIRE(ipsg_engine_create_scanner(&e) == IPSG_OK);
    CHECK(ipsg_engine_load(e, path.c_str()) == IPSG_OK);
    CHECK(ipsg_engine_record_count(e) == 0);
    ipsg_decision d;
    std::uint64_t n, m;
    REQUIRE(ipsg_engine_record_outcome(e, kBlue.c_str(), IPSG_KIND_FILE_CONTENT, "f", "alice", "operator_confirmed=1", 7, 7,
                                       &d, &n, &m) == IPSG_OK);
    CHECK(d == IPSG_DECISION_GRANTED);
    REQUIRE(ipsg_engine_save(e, path.c_str()) == IPSG_OK);

    ipsg_engine* f = nullptr;
    REQUIRE(ipsg_engine_create_scanner(&f) == IPSG_OK);
    REQUIRE(ipsg_engine_load(f, path.c_str()) == IPSG_OK);
    int trusted = 0;
    CHECK(ipsg_engine_is_trusted(f, kBlue.c_str(), IPSG_KIND_FILE_CONTENT, "alice", &trusted) == IPSG_OK);
    CHECK(trusted == 1);

    std::string bytes = slurp(path);
    bytes[12] ^= 1;
    std::ofstream(path, std::ios::binary) << bytes;
    CHECK(ipsg_engine_load(f, path.c_str()) == IPSG_E_INTEGRITY);
    CHECK(ipsg_engine_record_count(f) == 1);

    std::ofstream(path, std::ios::binary) << "IPSDB 2\n";
    CHECK(ipsg_engine_load(f, path.c_str()) == IPSG_E_VERSION);
    CHECK(ipsg_engine_save(f, (dir / "missing" / "x.db").string().c_str()) == IPSG_E_IO);
    ipsg_engine_destroy(e);
    ipsg_engine_destroy(f);
}

TEST_CASE("audit through the C API")
{
    TempDir dir;
    const std::string log = (dir / "a.log").string();
    int valid = 0;
    std::uint64_t line = 99;
    CHECK(ipsg_audit_verify(log.c_str(), &valid, &line) == IPSG_OK);
    CHECK(valid == 1);
    CHECK(line == 0);
    CHECK(ipsg_audit_append(log.c_str(), 1, IPSG_EVENT_GRANT, kBlue.c_str(), nullptr) == IPSG_OK);
    CHECK(ipsg_audit_append(log.c_str(), 2, IPSG_EVENT_REVOKE, kBlue.c_str(), "alice") == IPSG_OK);
    CHECK(ipsg_audit_append(log.c_str(), 2, IPSG_EVENT_REVOKE, "zz", "alice") == IPSG_E_INVALID_ARGUMENT);
    CHECK(ipsg_audit_verify(log.c_str(), &valid, &line) == IPSG_OK);
    CHECK(valid == 1);
    CHECK(line == 2);

    std::string text = slurp(log);
    text[2] = '7';
    std::ofstream(log, std::ios::binary) << text;
    CHECK(ipsg_audit_verify(log.c_str(), &valid, &line) == IPSG_OK);
    CHECK(valid == 0);
    CHECK(line == 1);
    CHECK(ipsg_audit_append(log.c_str(), 3, IPSG_EVENT_GRANT, kBlue.c_str(), nullptr) == IPSG_E_CHAIN);
}

TEST_CASE("simulator through the C API")
{
    ipsg_scenario* s = nullptr;
    CHECK(ipsg_scenario_parse("WORLD 10 10\nBALL 5 5\nBOT b 1 1 7 5\nEND 3\n", 0, &s) == IPSG_E_SCENARIO);
    CHECK(ipsg_last_error_line() == 3);
    CHECK(ipsg_scenario_load((kSource + "/scenarios/nope.scn").c_str(), 0, &s) == IPSG_E_IO);

    REQUIRE(ipsg_scenario_load((kSource + "/scenarios/maintenance.scn").c_str(), 7, &s) == IPSG_OK);
    CHECK(ipsg_scenario_ticks(s) == 90);
    ipsg_engine* e = nullptr;
    REQUIRE(ipsg_scenario_create_engine(s, &e) == IPSG_OK);
    ipsg_sim_result* r = nullptr;
    REQUIRE(ipsg_sim_run(s, e, 0, &r) == IPSG_OK);
    CHECK(std::string(ipsg_sim_result_trace(r)) == slurp(kSource + "/tests/data/maintenance.trace"));
    REQUIRE(ipsg_sim_result_grant_count(r) == 1);
    std::uint64_t tick = 0;
    char digest[65];
    CHECK(ipsg_sim_result_grant(r, 0, &tick, digest) == IPSG_OK);
    CHECK(tick == 28);
    CHECK(std::string(digest) == kBlue);
    CHECK(ipsg_sim_result_grant(r, 1, &tick, digest) == IPSG_E_INVALID_ARGUMENT);

    int holds = 0;
    std::uint64_t first = 0;
    CHECK(ipsg_check_failsafe(s, ipsg_sim_result_trace(r), &holds, &first) == IPSG_OK);
    CHECK(ipsg_check_failsafe(s, "nonsense\n", &holds, &first) == IPSG_E_TRACE);

    // A second run on the same scenario starts from tick 0 with the engine
    // already trusting the token, so no new grant appears.
    ipsg_sim_result* r2 = nullptr;
    REQUIRE(ipsg_sim_run(s, e, 10, &r2) == IPSG_OK);
    CHECK(ipsg_sim_result_grant_count(r2) == 0);
    CHECK(std::string(ipsg_sim_result_trace(r2)).find("T 10 ") != std::string::npos);
    CHECK(std::string(ipsg_sim_result_trace(r2)).find("T 11 ") == std::string::npos);

    int inside = 0;
    CHECK(ipsg_within_return_window(1000, 1000, 1030, 980, &inside) == IPSG_OK);
    CHECK(inside == 1);
    CHECK(ipsg_within_return_window(1000, 1000, 1060, 1000, &inside) == IPSG_OK);
    CHECK(inside == 0);
    CHECK(ipsg_within_return_window(0, 1000, 0, 1000, &inside) == IPSG_E_DOMAIN);

    ipsg_sim_result_destroy(r);
    ipsg_sim_result_destroy(r2);
    ipsg_engine_destroy(e);
    ipsg_scenario_destroy(s);
}

TEST_CASE("scanner through the C API")
{
    TempDir dir;
    const auto corpus = ipsg::testing::make_corpus(dir.path());
    ipsg_sigdb* db = nullptr;
    REQUIRE(ipsg_sigdb_load(corpus.sigdb.c_str(), &db) == IPSG_OK);
    CHECK(ipsg_sigdb_count(db) == 3);
    ipsg_userdb* users = nullptr;
    REQUIRE(ipsg_userdb_load(corpus.userdb.c_str(), &users) == IPSG_OK);
    int ok = 0;
    CHECK(ipsg_verify_credentials(users, "bob", "swordfish", &ok) == IPSG_OK);
    CHECK(ok == 1);
    CHECK(ipsg_verify_credentials(users, "bob", "hunter2", &ok) == IPSG_OK);
    CHECK(ok == 0);

    ipsg_engine* e = nullptr;
    REQUIRE(ipsg_engine_create_scanner(&e) == IPSG_OK);
    std::vector<std::string> owned;
    for (const auto& p : corpus.files) owned.push_back(p.string());
    std::vector<const char*> paths;
    for (const auto& p : owned) paths.push_back(p.c_str());

    ipsg_report* report = nullptr;
    REQUIRE(ipsg_scan(paths.data(), paths.size(), db, e, "alice", &report) == IPSG_OK);
    CHECK(ipsg_report_entry_count(report) == 3);
    CHECK(ipsg_report_flagged_count(report) == 3);
    ipsg_entry_info info;
    REQUIRE(ipsg_report_entry(report, 1, &info) == IPSG_OK);
    CHECK(std::string(info.signature) == "evil");
    CHECK(info.disposition == IPSG_FLAGGED);
    CHECK(std::string(info.path) == corpus.infected[1].string());
    CHECK(ipsg_report_entry(report, 3, &info) == IPSG_E_INVALID_ARGUMENT);

    ipsg_session* session = nullptr;
    REQUIRE(ipsg_session_create(5, &session) == IPSG_OK);
    ipsg_challenge* ch = nullptr;
    REQUIRE(ipsg_challenge_issue(session, report, 1, "alice", &ch) == IPSG_OK);
    const std::string token = ipsg_challenge_token(ch);
    CHECK(token.size() == 6);
    int granted = -1;
    const char* reason = nullptr;
    CHECK(ipsg_challenge_answer(session, ch, token.c_str(), "alice", "nope", users, e, nullptr, &granted, &reason) == IPSG_OK);
    CHECK(granted == 0);
    CHECK(std::string(reason) == "bad_credentials");
    CHECK(ipsg_challenge_answer(session, ch, token.c_str(), "alice", "hunter2", users, e, nullptr, &granted, &reason) ==
          IPSG_E_EXPIRED_CHALLENGE);
    ipsg_challenge_destroy(ch);

    REQUIRE(ipsg_challenge_issue(session, report, 1, "alice", &ch) == IPSG_OK);
    CHECK(ipsg_challenge_answer(session, ch, ipsg_challenge_token(ch), "alice", "hunter2", users, e, nullptr, &granted,
                                &reason) == IPSG_OK);
    CHECK(granted == 1);
    ipsg_challenge_destroy(ch);

    ipsg_report* again = nullptr;
    REQUIRE(ipsg_scan(paths.data(), paths.size(), db, e, "alice", &again) == IPSG_OK);
    CHECK(ipsg_report_flagged_count(again) == 2);
    CHECK(ipsg_report_trusted_count(again) == 1);
    REQUIRE(ipsg_report_entry(again, 1, &info) == IPSG_OK);
    CHECK(info.disposition == IPSG_TRUSTED);
    CHECK(ipsg_challenge_issue(session, again, 1, "alice", &ch) == IPSG_E_NOT_FLAGGED);
    char* text = nullptr;
    REQUIRE(ipsg_report_render(again, &text) == IPSG_OK);
    CHECK(take(text).find(" evil TRUSTED\n") != std::string::npos);

    ipsg_report_destroy(again);
    ipsg_report_destroy(report);
    ipsg_session_destroy(session);
    ipsg_engine_destroy(e);
    ipsg_userdb_destroy(users);
    ipsg_sigdb_destroy(db);
}
