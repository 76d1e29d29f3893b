#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "porofs.h"

namespace {

const char* kDecoupledDoc =
    "[mesh]\nnx = 2\nny = 2\nnz = 2\nflow_xmin = dirichlet\n"
    "[material]\nbiot_alpha = 0\n"
    "[time]\nn_steps = 2\n"
    "[scenario]\ninitial_pressure = 1e6\n";

bool contains(const char* hay, const char* needle) {
  return hay && std::strstr(hay, needle) != nullptr;
}

}  // namespace

TEST_CASE("version and argument validation") {
  CHECK(contains(porofs_version(), "1."));
  CHECK(porofs_config_parse_string(nullptr, nullptr) == POROFS_ERR_INVALID);
  porofs_config* cfg = nullptr;
  CHECK(porofs_config_parse_string(nullptr, &cfg) == POROFS_ERR_INVALID);
  CHECK(cfg == nullptr);
  CHECK(porofs_run(nullptr, nullptr, nullptr) == POROFS_ERR_INVALID);
  CHECK(porofs_report_render(nullptr, nullptr) == POROFS_ERR_INVALID);
  porofs_config_free(nullptr);  // must be a no-op
  porofs_string_free(nullptr);  // must be a no-op
}

TEST_CASE("parse errors set codes and thread-local messages") {
  porofs_config* cfg = nullptr;
  CHECK(porofs_config_parse_string("[mesh]\nwidgets = 1\n", &cfg) == POROFS_ERR_PARSE);
  CHECK(cfg == nullptr);
  CHECK(contains(porofs_last_error(), "line 2"));
  CHECK(contains(porofs_last_error(), "widgets"));

  CHECK(porofs_config_parse_string("[material]\nbiot_modulus = -5\n", &cfg) ==
        POROFS_ERR_PARSE);
  CHECK(contains(porofs_last_error(), "biot_modulus"));

  CHECK(porofs_config_parse_file("does_not_exist.cfg", &cfg) == POROFS_ERR_IO);
  CHECK(contains(porofs_last_error(), "does_not_exist.cfg"));
}

TEST_CASE("run through the C interface produces reports and stats") {
  porofs_config* cfg = nullptr;
  REQUIRE(porofs_config_parse_string(kDecoupledDoc, &cfg) == POROFS_OK);
  REQUIRE(cfg != nullptr);

  std::filesystem::remove_all("capi_out");
  porofs_run_stats stats{};
  CHECK(porofs_run(cfg, "capi_out", &stats) == POROFS_OK);
  CHECK(stats.completed == 1);
  CHECK(stats.steps_completed == 2);
  CHECK(stats.total_coupling_iterations == 4);
  CHECK(stats.final_max_ratio == 0.0);  // no coupling, no measurable ratio
  CHECK(std::filesystem::exists("capi_out/steps.csv"));
  CHECK(std::filesystem::exists("capi_out/iterations.csv"));
  porofs_config_free(cfg);

  char* text = nullptr;
  CHECK(porofs_report_render("capi_out/iterations.csv", &text) == POROFS_OK);
  REQUIRE(text != nullptr);
  CHECK(contains(text, "contraction summary"));
  porofs_string_free(text);

  CHECK(porofs_report_render("capi_out/missing.csv", &text) == POROFS_ERR_IO);
  // A steps CSV is not an iterations CSV; the renderer must say so.
  CHECK(porofs_report_render("capi_out/steps.csv", &text) == POROFS_ERR_PARSE);
  std::filesystem::remove_all("capi_out");
}

TEST_CASE("run failure surfaces as a run error with partial stats") {
  const char* doc =
      "[mesh]\nnx = 2\nny = 2\nnz = 2\nflow_xmin = dirichlet\n"
      "[material]\nbiot_alpha = 0.8\n"
      "[time]\nn_steps = 2\n"
      "[coupling]\nmax_coupling_iters = 3\ntol = 1e-15\ntol_bracket = 0\n"
      "[scenario]\ninitial_pressure = 1e6\n";
  porofs_config* cfg = nullptr;
  REQUIRE(porofs_config_parse_string(doc, &cfg) == POROFS_OK);
  std::filesystem::remove_all("capi_fail");
  porofs_run_stats stats{};
  CHECK(porofs_run(cfg, "capi_fail", &stats) == POROFS_ERR_RUN);
  CHECK(stats.completed == 0);
  CHECK(porofs_last_error()[0] != '\0');
  // Reports are still written for the partial history.
  CHECK(std::filesystem::exists("capi_fail/steps.csv"));
  porofs_config_free(cfg);
  std::filesystem::remove_all("capi_fail");
}

TEST_CASE("verify suites through the C interface") {
  char* report = nullptr;
  CHECK(porofs_verify("tensor", &report) == POROFS_OK);
  REQUIRE(report != nullptr);
  CHECK(contains(report, "PASS tensor"));
  porofs_string_free(report);

  report = nullptr;
  CHECK(porofs_verify("no_such_suite", &report) == POROFS_ERR_VERIFY);
  REQUIRE(report != nullptr);
  CHECK(contains(report, "no suites match"));
  porofs_string_free(report);
}
