#ifndef POROFS_H
#define POROFS_H

/* C interface to the coupled poroelastoplasticity engine. All functions are
 * thread-compatible: distinct handles may be used from distinct threads, and
 * error text is stored per thread. Strings returned through char** are owned
 * by the caller and must be released with porofs_string_free. */

#ifdef __cplusplus
extern "C" {
#endif

typedef struct porofs_config porofs_config;

enum porofs_status {
  POROFS_OK = 0,
  POROFS_ERR_INVALID = 1, /* null/invalid arguments */
  POROFS_ERR_PARSE = 2,   /* configuration grammar or validation failure */
  POROFS_ERR_RUN = 3,     /* solver failure or non-convergence */
  POROFS_ERR_IO = 4,      /* file could not be read or written */
  POROFS_ERR_VERIFY = 5   /* one or more verify suites failed */
};

typedef struct porofs_run_stats {
  int steps_completed;           /* committed time steps */
  int total_coupling_iterations; /* summed over committed steps */
  double final_max_ratio;        /* worst contraction ratio of the last step */
  int completed;                 /* 1 iff every requested step converged */
} porofs_run_stats;

/* Library version as "major.minor.patch". Static storage; do not free. */
const char* porofs_version(void);

/* Message for the most recent failure on this thread. Static storage valid
 * until the next porofs_* call on the same thread; do not free. */
const char* porofs_last_error(void);

/* Parse a configuration document (see README for the grammar). On success
 * writes a handle to *out; release it with porofs_config_free. */
int porofs_config_parse_string(const char* text, porofs_config** out);
int porofs_config_parse_file(const char* path, porofs_config** out);
void porofs_config_free(porofs_config* cfg);

/* Execute a configured transient run. out_dir overrides the configured
 * output directory when non-NULL and non-empty. stats may be NULL. CSV
 * reports are written even when the run fails part way. */
int porofs_run(const porofs_config* cfg, const char* out_dir, porofs_run_stats* stats);

/* Run the built-in property suites; filter (may be NULL) selects suites by
 * substring. *report receives a pass/fail line per suite. Returns POROFS_OK
 * only when every selected suite passed. */
int porofs_verify(const char* filter, char** report);

/* Render an iterations CSV produced by porofs_run into a plain-text
 * per-step contraction summary. */
int porofs_report_render(const char* csv_path, char** text);

void porofs_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* POROFS_H */
