/*
 * ipsg: trust acquisition engine with a guard-robot simulator and a
 * challenge-response signature scanner.
 *
 * C interface. Objects are opaque handles created by *_create / *_load /
 * *_parse functions and released by the matching *_destroy. Every call that
 * can fail returns an ipsg_status; on failure ipsg_last_error() describes the
 * problem. Strings returned through char** out-parameters are owned by the
 * caller and released with ipsg_string_free(). Strings returned directly by
 * accessor functions live as long as the handle they came from.
 *
 * Digests are passed as 64-character hex strings. A NULL or "-" scope means
 * the global scope; any other value names a principal.
 *
 * Handles are not internally synchronized.
 */
#ifndef IPSG_IPSG_H
#define IPSG_IPSG_H

#include <stddef.h>
#include <stdint.h>

#if defined(IPSG_BUILDING_LIBRARY)
#define IPSG_API __attribute__((visibility("default")))
#else
#define IPSG_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ipsg_status {
    IPSG_OK = 0,
    IPSG_E_INVALID_ARGUMENT = 1,
    IPSG_E_POLICY = 2,
    IPSG_E_IO = 3,
    IPSG_E_FORMAT = 4,
    IPSG_E_INTEGRITY = 5,
    IPSG_E_VERSION = 6,
    IPSG_E_DUPLICATE_KEY = 7,
    IPSG_E_CHAIN = 8,
    IPSG_E_DOMAIN = 9,
    IPSG_E_SCENARIO = 10,
    IPSG_E_TRACE = 11,
    IPSG_E_NOT_FLAGGED = 12,
    IPSG_E_EXPIRED_CHALLENGE = 13,
    IPSG_E_INTERNAL = 99
} ipsg_status;

typedef enum ipsg_kind {
    IPSG_KIND_AGENT_TOKEN = 0,
    IPSG_KIND_FILE_CONTENT = 1
} ipsg_kind;

typedef enum ipsg_decision {
    IPSG_DECISION_GRANTED = 0,
    IPSG_DECISION_PENDING = 1,
    IPSG_DECISION_NON_COMPLIANT = 2
} ipsg_decision;

typedef enum ipsg_event {
    IPSG_EVENT_GRANT = 0,
    IPSG_EVENT_REVOKE = 1,
    IPSG_EVENT_SUPPRESS = 2,
    IPSG_EVENT_REACT = 3
} ipsg_event;

typedef enum ipsg_disposition {
    IPSG_FLAGGED = 0,
    IPSG_TRUSTED = 1,
    IPSG_READ_ERROR = 2
} ipsg_disposition;

IPSG_API const char* ipsg_status_name(ipsg_status status);
/* Message for the last failed call on this thread; "" if none. */
IPSG_API const char* ipsg_last_error(void);
/* Line number attached to the last error (scenario, store, ...), 0 if none. */
IPSG_API size_t ipsg_last_error_line(void);
IPSG_API void ipsg_string_free(char* s);

/* sha256 of a byte buffer, written as 64 hex characters plus NUL. */
IPSG_API ipsg_status ipsg_sha256_hex(const void* data, size_t size, char out_hex[65]);

/* ---- trust engine ------------------------------------------------------ */

typedef struct ipsg_engine ipsg_engine;

/* rule: conjunction such as "returned == 1 && score in 3..7". */
IPSG_API ipsg_status ipsg_engine_create(const char* rule, uint32_t min_compliant, uint64_t threshold_num,
                                        uint64_t threshold_den, ipsg_engine** out);
/* Engine with the scanner's policy: operator_confirmed == 1, one episode. */
IPSG_API ipsg_status ipsg_engine_create_scanner(ipsg_engine** out);
IPSG_API void ipsg_engine_destroy(ipsg_engine* engine);

/* Replaces the engine's records with the store at path; absent file = empty. */
IPSG_API ipsg_status ipsg_engine_load(ipsg_engine* engine, const char* path);
IPSG_API ipsg_status ipsg_engine_save(const ipsg_engine* engine, const char* path);
IPSG_API size_t ipsg_engine_record_count(const ipsg_engine* engine);

IPSG_API ipsg_status ipsg_engine_is_trusted(const ipsg_engine* engine, const char* digest_hex, ipsg_kind kind,
                                            const char* scope, int* trusted);
/* *suppressed = 1 for Suppress, 0 for React. */
IPSG_API ipsg_status ipsg_engine_classify(const ipsg_engine* engine, const char* digest_hex, ipsg_kind kind,
                                          const char* scope, int* suppressed);
/* outcome: "name=value;name=value", values are integers or "quoted text". */
IPSG_API ipsg_status ipsg_engine_record_outcome(ipsg_engine* engine, const char* digest_hex, ipsg_kind kind,
                                                const char* label, const char* scope, const char* outcome,
                                                uint64_t start_tick, uint64_t end_tick, ipsg_decision* decision,
                                                uint64_t* quotient_num, uint64_t* quotient_den);
IPSG_API ipsg_status ipsg_engine_revoke(ipsg_engine* engine, const char* digest_hex, ipsg_kind kind,
                                        const char* scope, int* revoked);
/* Revokes whichever record has this digest and scope, whatever its kind. */
IPSG_API ipsg_status ipsg_engine_revoke_digest(ipsg_engine* engine, const char* digest_hex, const char* scope,
                                               int* revoked);
/* One line per record sorted by (scope, digest):
 *   <scope> <digest> <kind> <compliant> <total> <GRANTED|PENDING> <granted_tick|-> <label>
 * scope_filter NULL lists every scope. */
IPSG_API ipsg_status ipsg_engine_list(const ipsg_engine* engine, const char* scope_filter, char** out_text);

/* ---- audit log --------------------------------------------------------- */

IPSG_API ipsg_status ipsg_audit_append(const char* path, uint64_t tick, ipsg_event event, const char* digest_hex,
                                       const char* scope);
/* *valid = 1 and *line = number of lines, or *valid = 0 and *line = first bad line. */
IPSG_API ipsg_status ipsg_audit_verify(const char* path, int* valid, uint64_t* line);

/* ---- simulator --------------------------------------------------------- */

typedef struct ipsg_scenario ipsg_scenario;
typedef struct ipsg_sim_result ipsg_sim_result;

IPSG_API ipsg_status ipsg_scenario_parse(const char* text, uint64_t seed, ipsg_scenario** out);
IPSG_API ipsg_status ipsg_scenario_load(const char* path, uint64_t seed, ipsg_scenario** out);
IPSG_API void ipsg_scenario_destroy(ipsg_scenario* scenario);
/* Tick count from the END directive. */
IPSG_API uint64_t ipsg_scenario_ticks(const ipsg_scenario* scenario);
/* Engine with the simulator policy (returned == 1, min_compliant from CONFIG). */
IPSG_API ipsg_status ipsg_scenario_create_engine(const ipsg_scenario* scenario, ipsg_engine** out);

/* Runs a fresh copy of the scenario's world; ticks = 0 uses END. */
IPSG_API ipsg_status ipsg_sim_run(const ipsg_scenario* scenario, ipsg_engine* engine, uint64_t ticks,
                                  ipsg_sim_result** out);
IPSG_API const char* ipsg_sim_result_trace(const ipsg_sim_result* result);
IPSG_API size_t ipsg_sim_result_grant_count(const ipsg_sim_result* result);
IPSG_API ipsg_status ipsg_sim_result_grant(const ipsg_sim_result* result, size_t index, uint64_t* tick,
                                           char digest_hex[65]);
IPSG_API void ipsg_sim_result_destroy(ipsg_sim_result* result);

/* *holds = 1, or *holds = 0 with the first violating tick. Bot ranges come
 * from the scenario. */
IPSG_API ipsg_status ipsg_check_failsafe(const ipsg_scenario* scenario, const char* trace, int* holds,
                                         uint64_t* first_tick);
IPSG_API ipsg_status ipsg_within_return_window(int64_t x0, int64_t y0, int64_t x, int64_t y, int* inside);

/* ---- scanner ----------------------------------------------------------- */

typedef struct ipsg_sigdb ipsg_sigdb;
typedef struct ipsg_userdb ipsg_userdb;
typedef struct ipsg_report ipsg_report;
typedef struct ipsg_session ipsg_session;
typedef struct ipsg_challenge ipsg_challenge;

typedef struct ipsg_entry_info {
    const char* path;
    const char* signature; /* "" for read errors */
    char digest_hex[65];   /* "" for read errors */
    ipsg_disposition disposition;
} ipsg_entry_info;

IPSG_API ipsg_status ipsg_sigdb_load(const char* path, ipsg_sigdb** out);
IPSG_API ipsg_status ipsg_sigdb_save(const ipsg_sigdb* db, const char* path);
IPSG_API size_t ipsg_sigdb_count(const ipsg_sigdb* db);
IPSG_API void ipsg_sigdb_destroy(ipsg_sigdb* db);

IPSG_API ipsg_status ipsg_userdb_load(const char* path, ipsg_userdb** out);
IPSG_API void ipsg_userdb_destroy(ipsg_userdb* db);
IPSG_API ipsg_status ipsg_verify_credentials(const ipsg_userdb* db, const char* name, const char* password,
                                             int* ok);

IPSG_API ipsg_status ipsg_scan(const char* const* paths, size_t path_count, const ipsg_sigdb* db,
                               const ipsg_engine* engine, const char* principal, ipsg_report** out);
IPSG_API size_t ipsg_report_entry_count(const ipsg_report* report);
IPSG_API size_t ipsg_report_flagged_count(const ipsg_report* report);
IPSG_API size_t ipsg_report_trusted_count(const ipsg_report* report);
IPSG_API ipsg_status ipsg_report_entry(const ipsg_report* report, size_t index, ipsg_entry_info* info);
IPSG_API ipsg_status ipsg_report_render(const ipsg_report* report, char** out_text);
IPSG_API void ipsg_report_destroy(ipsg_report* report);

IPSG_API ipsg_status ipsg_session_create(uint64_t seed, ipsg_session** out);
IPSG_API void ipsg_session_destroy(ipsg_session* session);
/* Challenge for a Flagged report entry; IPSG_E_NOT_FLAGGED otherwise. */
IPSG_API ipsg_status ipsg_challenge_issue(ipsg_session* session, const ipsg_report* report, size_t index,
                                          const char* principal, ipsg_challenge** out);
IPSG_API const char* ipsg_challenge_token(const ipsg_challenge* challenge);
IPSG_API void ipsg_challenge_destroy(ipsg_challenge* challenge);
/* Single use. On success *granted = 1; otherwise *granted = 0 and *reason is
 * one of "token_mismatch", "principal_mismatch", "bad_credentials". A non-NULL
 * literal_db switches to deleting the matched signature from that database
 * instead of recording trust. */
IPSG_API ipsg_status ipsg_challenge_answer(ipsg_session* session, const ipsg_challenge* challenge,
                                           const char* token, const char* user, const char* password,
                                           const ipsg_userdb* users, ipsg_engine* engine, ipsg_sigdb* literal_db,
                                           int* granted, const char** reason);

#ifdef __cplusplus
}
#endif

#endif /* IPSG_IPSG_H */
