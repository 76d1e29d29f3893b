#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>

#include "porofs.h"

namespace {

int cmd_run(const std::string& config_path, const std::string& out_dir) {
  porofs_config* cfg = nullptr;
  int rc = porofs_config_parse_file(config_path.c_str(), &cfg);
  if (rc != POROFS_OK) {
    std::fprintf(stderr, "error: %s\n", porofs_last_error());
    return 1;
  }
  porofs_run_stats stats{};
  rc = porofs_run(cfg, out_dir.empty() ? nullptr : out_dir.c_str(), &stats);
  porofs_config_free(cfg);
  if (rc != POROFS_OK) {
    std::fprintf(stderr, "error: %s\n", porofs_last_error());
    std::fprintf(stderr, "completed %d steps before failing\n", stats.steps_completed);
    return 1;
  }
  std::printf("completed %d steps, %d coupling iterations total\n", stats.steps_completed,
              stats.total_coupling_iterations);
  std::printf("final step worst contraction ratio: %.6g\n", stats.final_max_ratio);
  return 0;
}

int cmd_verify(const std::string& filter) {
  char* report = nullptr;
  const int rc = porofs_verify(filter.empty() ? nullptr : filter.c_str(), &report);
  if (report) {
    std::fputs(report, stdout);
    porofs_string_free(report);
  }
  if (rc != POROFS_OK) {
    std::fprintf(stderr, "error: %s\n", porofs_last_error());
    return 1;
  }
  return 0;
}

int cmd_report(const std::string& csv_path) {
  char* text = nullptr;
  const int rc = porofs_report_render(csv_path.c_str(), &text);
  if (rc != POROFS_OK) {
    std::fprintf(stderr, "error: %s\n", porofs_last_error());
    return 1;
  }
  std::fputs(text, stdout);
  porofs_string_free(text);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coupled poroelastoplasticity driver"};
  app.require_subcommand(1);

  std::string config_path, out_dir, filter, csv_path;
  CLI::App* run = app.add_subcommand("run", "execute a configured transient run");
  run->add_option("config", config_path, "configuration file")->required();
  run->add_option("--out", out_dir, "override the output directory");
  CLI::App* verify = app.add_subcommand("verify", "run the built-in property suites");
  verify->add_option("--filter", filter, "select suites by substring");
  CLI::App* report = app.add_subcommand("report", "summarize an iterations CSV");
  report->add_option("csv", csv_path, "iterations CSV from a previous run")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // help exits clean; any usage problem is 2
  }

  if (run->parsed()) return cmd_run(config_path, out_dir);
  if (verify->parsed()) return cmd_verify(filter);
  return cmd_report(csv_path);
}
