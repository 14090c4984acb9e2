#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "streamflow/events.hpp"

namespace streamflow {

struct JobRecord {
  std::string id;  // empty for tasks that failed before a job was launched
  std::string step;
  std::string model;
  std::string service;
  std::string status;  // completed | failed
  std::string error;
  std::vector<std::string> resources;
  int ranks = 1;
  int exit_code = 0;
  std::optional<double> queued, scheduled, staged, started, finished;
};

struct CopyRecord {
  std::string token;
  std::string kind;  // local_to_remote | remote_to_local | remote_to_remote | local
  std::string src;   // resource id or "management"
  std::string src_path;
  std::string dst;
  std::string dst_path;
  uint64_t bytes = 0;
  double duration = 0.0;
};

struct ModelRecord {
  std::string name;
  bool external = false;
  int deploy_count = 0;
  int redeploy_count = 0;
  std::optional<double> deployed_at;
  std::optional<double> undeployed_at;
  std::vector<std::string> resources;
};

struct OutputRecord {
  std::string token;
  std::string name;
  std::string path;  // management-node path after the terminal gather
};

// The run's ground truth: serialized to JSON, consumed by `report` and by
// the acceptance suite.
struct RunReport {
  std::string run_id;
  std::string workflow;
  std::string status;  // completed | failed
  std::vector<Event> events;
  std::vector<JobRecord> jobs;
  std::vector<CopyRecord> copies;
  std::vector<ModelRecord> models;
  std::vector<OutputRecord> outputs;
  std::vector<std::string> teardown_failures;

  double makespan() const;  // max(finished) - min(queued) over jobs

  json to_json() const;
  static RunReport from_json(const json& j);
};

std::vector<CopyRecord> copies_from_events(const std::vector<Event>& events);

RunReport load_report(const std::filesystem::path& file);
void save_report(const RunReport& report, const std::filesystem::path& file);

// Renderers are pure functions of the report: identical input and format
// yield byte-identical output.
std::string render_summary(const RunReport& report);
std::string render_text_gantt(const RunReport& report, int width = 100);
std::string render_svg(const RunReport& report);
std::string render_report(const RunReport& report, const std::string& format);

}  // namespace streamflow
