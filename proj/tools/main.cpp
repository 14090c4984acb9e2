#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "streamflow/config.hpp"
#include "streamflow/engine.hpp"
#include "streamflow/errors.hpp"
#include "streamflow/report.hpp"

namespace fs = std::filesystem;
using namespace streamflow;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitExecution = 2;
constexpr int kExitTeardown = 3;

constexpr const char* kSandboxRootVariable = "STREAMFLOW_SANDBOX_ROOT";

int cmd_validate(const std::string& path) {
  try {
    StreamflowFile file = load_streamflow_file(path);
    for (const auto& [name, _] : file.workflows) {
      validate_workflow(file, name);
    }
    std::cout << "OK: " << path << " (" << file.workflows.size() << " workflow(s), "
              << file.models.size() << " model(s))\n";
    return kExitOk;
  } catch (const ValidationError& ex) {
    std::cerr << "validation error: " << ex.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitValidation;
  }
}

int cmd_run(const std::string& path, bool serial, const fs::path& outdir,
            const std::string& report_path) {
  StreamflowFile file;
  try {
    file = load_streamflow_file(path);
    if (!report_path.empty() && file.workflows.size() > 1) {
      throw ValidationError("--report",
                            "explicit report path needs a single-workflow file");
    }
    for (const auto& [name, _] : file.workflows) {
      validate_workflow(file, name);
    }
  } catch (const ValidationError& ex) {
    std::cerr << "validation error: " << ex.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitValidation;
  }

  // Workflow entries run sequentially, each with its own freshly deployed
  // stack, report and output directory.
  int exit_code = kExitOk;
  for (const auto& [name, _] : file.workflows) {
    RunOptions options;
    options.serial = serial;
    options.outdir = outdir / name;
    if (const char* env = std::getenv(kSandboxRootVariable)) {
      options.sandbox_root = fs::path(env) / name;
    }
    RunReport report;
    try {
      Engine engine(file, name, options);
      report = engine.run();
    } catch (const ValidationError& ex) {
      std::cerr << "validation error: " << ex.what() << "\n";
      return kExitValidation;
    } catch (const std::exception& ex) {
      std::cerr << "error: workflow '" << name << "': " << ex.what() << "\n";
      return std::max(exit_code, kExitExecution);
    }

    fs::path report_file =
        report_path.empty() ? options.outdir / "report.json" : fs::path(report_path);
    save_report(report, report_file);
    std::cout << render_summary(report);
    std::cout << "report:    " << report_file.string() << "\n";

    if (!report.teardown_failures.empty()) {
      exit_code = std::max(exit_code, kExitTeardown);
    } else if (report.status != "completed") {
      exit_code = std::max(exit_code, kExitExecution);
    }
  }
  return exit_code;
}

int cmd_report(const std::string& path, const std::string& format) {
  try {
    RunReport report = load_report(path);
    std::cout << render_report(report, format);
    return kExitOk;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitValidation;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"streamflow - workflow execution across hybrid multi-container environments"};
  app.require_subcommand(1);

  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "off|error|warn|info|debug")
      ->capture_default_str();

  auto* run = app.add_subcommand("run", "execute the workflows in a streamflow file");
  std::string run_file;
  bool serial = false;
  fs::path outdir = "streamflow-out";
  std::string report_path;
  run->add_option("file", run_file, "streamflow.yml path")->required();
  run->add_flag("--serial", serial, "one job at a time (deterministic event order)");
  run->add_option("--outdir", outdir, "run state directory")->capture_default_str();
  run->add_option("--report", report_path, "report path (single-workflow files)");

  auto* validate = app.add_subcommand("validate", "check a streamflow file and its workflows");
  std::string validate_file;
  validate->add_option("file", validate_file, "streamflow.yml path")->required();

  auto* report = app.add_subcommand("report", "render a run report");
  std::string report_file;
  std::string format = "summary";
  report->add_option("report", report_file, "report.json path")->required();
  report->add_option("--format", format, "summary|text-gantt|svg")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  spdlog::set_level(spdlog::level::from_str(log_level));

  if (run->parsed()) return cmd_run(run_file, serial, outdir, report_path);
  if (validate->parsed()) return cmd_validate(validate_file);
  if (report->parsed()) return cmd_report(report_file, format);
  return kExitValidation;
}
