#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "streamflow/workflow.hpp"

namespace streamflow {

struct Target {
  std::string model;
  std::string service;

  bool operator==(const Target&) const = default;
};

// step-path -> (model, service) association with the `recycle` and
// `replicas` directives. `replicas` is std::nullopt when the directive is
// absent (effective value 1, but rank variables are only injected when the
// directive is present).
struct Binding {
  std::string step;
  Target target;
  bool recycle = false;
  std::optional<int> replicas;

  int effective_replicas() const { return replicas.value_or(1); }
  bool operator==(const Binding&) const = default;
};

struct WorkflowEntry {
  std::string name;
  std::string type;  // workflow language identifier; "native" is shipped
  std::string file;  // workflow document, relative to the streamflow file
  std::vector<Binding> bindings;

  bool operator==(const WorkflowEntry&) const = default;
};

// Injectable sandbox latency. Stored as configured (milliseconds) so the
// file round-trips exactly.
struct LatencyConfig {
  double deploy_ms = 0.0;
  double copy_fixed_ms = 0.0;
  double copy_per_mb_ms = 0.0;

  double deploy_delay_sec() const { return deploy_ms / 1000.0; }
  double copy_delay_sec(uint64_t bytes) const {
    return copy_fixed_ms / 1000.0 +
           copy_per_mb_ms / 1000.0 * (static_cast<double>(bytes) / (1 << 20));
  }

  bool operator==(const LatencyConfig&) const = default;
};

struct ServiceConfig {
  std::string name;
  int replicas = 1;
  std::optional<int> cores;
  std::optional<uint64_t> memory_bytes;
  std::map<std::string, std::string> environment;
  std::string root = "/work";  // working area, as seen from the resource

  bool operator==(const ServiceConfig&) const = default;
};

struct SandboxConfig {
  // Kept as a list: uniqueness of service names is a validation concern
  // (validate_service_names), not a parsing accident.
  std::vector<ServiceConfig> services;
  std::vector<std::string> shared_mounts;
  LatencyConfig latency;
  bool archive_on_undeploy = false;

  const ServiceConfig* find_service(const std::string& name) const;
  bool operator==(const SandboxConfig&) const = default;
};

struct ModelEntry {
  std::string name;
  std::string type;  // registered connector identifier
  bool external = false;
  SandboxConfig config;

  bool operator==(const ModelEntry&) const = default;
};

// Parsed streamflow.yml — the engine's entry point file.
struct StreamflowFile {
  std::string version;
  std::map<std::string, WorkflowEntry> workflows;
  std::map<std::string, ModelEntry> models;
  std::filesystem::path base_dir;  // directory the file was loaded from

  // Serialization with all defaults made explicit; reloading the output
  // yields an equal object.
  std::string to_yaml() const;

  bool operator==(const StreamflowFile& other) const {
    return version == other.version && workflows == other.workflows &&
           models == other.models;
  }
};

StreamflowFile parse_streamflow(const std::string& yaml_text,
                                const std::filesystem::path& base_dir = ".");
StreamflowFile load_streamflow_file(const std::filesystem::path& file);

// Unique service identifiers a model exposes; duplicates are rejected.
std::vector<std::string> validate_service_names(const ModelEntry& model);

// Every task mapped to the binding whose step path is its longest prefix.
class BindingTable {
 public:
  BindingTable() = default;
  explicit BindingTable(std::map<std::string, Binding> entries)
      : entries_(std::move(entries)) {}

  const Binding& lookup(const std::string& task_id) const;
  const std::map<std::string, Binding>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }

 private:
  std::map<std::string, Binding> entries_;  // task node id -> effective binding
};

BindingTable resolve_bindings(const std::vector<Binding>& bindings,
                              const WorkflowGraph& graph);
BindingTable resolve_bindings(const StreamflowFile& file,
                              const std::string& workflow_name,
                              const WorkflowGraph& graph);

}  // namespace streamflow
