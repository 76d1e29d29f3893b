#include "porofs.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "porofs/cli_io.hpp"

namespace {

thread_local std::string g_error;

int set_error(int code, const std::string& msg) {
  g_error = msg;
  return code;
}

/* malloc-backed copy so C callers may free() via porofs_string_free. */
char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

struct porofs_config_impl {
  porofs::RunConfig cfg;
};

}  // namespace

/* The opaque struct tag from the header maps onto the impl. */
struct porofs_config : porofs_config_impl {};

extern "C" {

const char* porofs_version(void) { return "1.0.0"; }

const char* porofs_last_error(void) { return g_error.c_str(); }

int porofs_config_parse_string(const char* text, porofs_config** out) {
  if (!text || !out) return set_error(POROFS_ERR_INVALID, "null argument");
  *out = nullptr;
  try {
    auto* h = new porofs_config;
    try {
      h->cfg = porofs::parse_config(text);
    } catch (...) {
      delete h;
      throw;
    }
    *out = h;
    return POROFS_OK;
  } catch (const porofs::ConfigError& e) {
    return set_error(POROFS_ERR_PARSE, e.what());
  } catch (const std::exception& e) {
    return set_error(POROFS_ERR_PARSE, e.what());
  }
}

int porofs_config_parse_file(const char* path, porofs_config** out) {
  if (!path || !out) return set_error(POROFS_ERR_INVALID, "null argument");
  *out = nullptr;
  std::ifstream f(path, std::ios::binary);
  if (!f) return set_error(POROFS_ERR_IO, std::string("cannot open config file: ") + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  const std::string text = buf.str();
  return porofs_config_parse_string(text.c_str(), out);
}

void porofs_config_free(porofs_config* cfg) { delete cfg; }

int porofs_run(const porofs_config* cfg, const char* out_dir, porofs_run_stats* stats) {
  if (!cfg) return set_error(POROFS_ERR_INVALID, "null configuration handle");
  if (stats) *stats = porofs_run_stats{};
  try {
    porofs::poro_threads_from_env();  // validated here; this build runs serial
    const porofs::RunOutcome r =
        porofs::run_from_config(cfg->cfg, out_dir ? std::string(out_dir) : std::string());
    if (stats) {
      stats->steps_completed = r.steps_done;
      stats->total_coupling_iterations = r.total_iterations;
      stats->final_max_ratio = r.final_max_ratio;
      stats->completed = r.completed ? 1 : 0;
    }
    if (!r.completed)
      return set_error(POROFS_ERR_RUN,
                       r.error.empty() ? "run did not complete" : r.error);
    return POROFS_OK;
  } catch (const porofs::ConfigError& e) {
    return set_error(POROFS_ERR_PARSE, e.what());
  } catch (const std::exception& e) {
    return set_error(POROFS_ERR_RUN, e.what());
  }
}

int porofs_verify(const char* filter, char** report) {
  try {
    const auto results = porofs::run_verify_suites(filter ? filter : "");
    std::ostringstream out;
    bool all = true;
    for (const auto& r : results) {
      all = all && r.passed;
      out << (r.passed ? "PASS" : "FAIL") << ' ' << r.name << ": " << r.detail << '\n';
    }
    if (results.empty()) {
      out << "no suites match filter\n";
      all = false;
    }
    if (report) *report = dup_string(out.str());
    if (!all) return set_error(POROFS_ERR_VERIFY, "one or more verify suites failed");
    return POROFS_OK;
  } catch (const std::exception& e) {
    return set_error(POROFS_ERR_RUN, e.what());
  }
}

int porofs_report_render(const char* csv_path, char** text) {
  if (!csv_path || !text) return set_error(POROFS_ERR_INVALID, "null argument");
  *text = nullptr;
  std::ifstream f(csv_path, std::ios::binary);
  if (!f) return set_error(POROFS_ERR_IO, std::string("cannot open CSV: ") + csv_path);
  std::ostringstream buf;
  buf << f.rdbuf();
  try {
    *text = dup_string(porofs::render_report(buf.str()));
    return POROFS_OK;
  } catch (const std::exception& e) {
    return set_error(POROFS_ERR_PARSE, e.what());
  }
}

void porofs_string_free(char* s) { std::free(s); }

}  // extern "C"
