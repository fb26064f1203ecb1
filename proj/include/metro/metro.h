/* C API for the METRO strategy-forest library.
 *
 * All functions return metro_status; METRO_OK is 0. On failure, a
 * thread-local message is available via metro_last_error(). Strings returned
 * through char** out-parameters are owned by the caller and must be released
 * with metro_string_free().
 */
#ifndef METRO_METRO_H
#define METRO_METRO_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum metro_status {
    METRO_OK = 0,
    METRO_ERR_IO = 1,
    METRO_ERR_CONFIG = 2,
    METRO_ERR_INGEST = 3,
    METRO_ERR_GATEWAY = 4,
    METRO_ERR_INVALID = 5,
    METRO_ERR_INTERNAL = 6
} metro_status;

typedef struct metro_config metro_config;
typedef struct metro_forest metro_forest;
typedef struct metro_session metro_session;

const char* metro_version(void);

/* Message for the most recent failure on this thread; empty string if none. */
const char* metro_last_error(void);

/* ---- configuration ---- */

metro_status metro_config_load(const char* path, metro_config** out);
/* task: "persuasion" | "negotiation" | "custom" */
metro_status metro_config_default(const char* task, metro_config** out);
/* Dotted-path override, e.g. metro_config_set(cfg, "cluster.k", "12"). */
metro_status metro_config_set(metro_config* cfg, const char* key, const char* value);
metro_status metro_config_dump(const metro_config* cfg, char** json_out);
void metro_config_free(metro_config* cfg);

/* ---- pipeline commands ---- */

/* annotate -> embed -> cluster -> build forest; writes the forest file and a
 * run manifest per the config's paths. */
metro_status metro_induce(const metro_config* cfg);

/* Self-play evaluation; returns the metrics report as JSON. */
metro_status metro_eval(const metro_config* cfg, char** report_json_out);

/* Diversity metrics over the configured forest. actions_path may be NULL. */
metro_status metro_analyze(const metro_config* cfg, const char* actions_path, char** json_out);

metro_status metro_merge(const char* forest_a_path, const char* forest_b_path,
                         const char* out_path);

/* Interactive terminal chat loop over stdin/stdout, with /quit and /state
 * commands and critic-driven termination. */
metro_status metro_chat(const metro_config* cfg);

/* ---- forest handles ---- */

metro_status metro_forest_open(const char* path, metro_forest** out);
size_t metro_forest_tree_count(const metro_forest* forest);
/* Human-readable dump of the tree for one cluster index. */
metro_status metro_forest_inspect(const metro_forest* forest, size_t cluster, char** text_out);
void metro_forest_free(metro_forest* forest);

/* ---- interactive sessions ---- */

/* The session owns an inference engine over the forest named in the config. */
metro_status metro_session_new(const metro_config* cfg, metro_session** out);
/* Agent speaks next, given the user's latest utterance (NULL or empty opens
 * the dialogue). The reply string goes to *agent_out. */
metro_status metro_session_step(metro_session* session, const char* user_utterance,
                                char** agent_out);
/* Retrieval/suggestion provenance of the last step, as JSON. */
metro_status metro_session_trace(const metro_session* session, char** json_out);
void metro_session_free(metro_session* session);

void metro_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* METRO_METRO_H */
