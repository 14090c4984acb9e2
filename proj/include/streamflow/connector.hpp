#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "streamflow/config.hpp"
#include "streamflow/subprocess.hpp"

namespace streamflow {

// One live replica of a service — the unit a job runs on.
struct Resource {
  std::string id;        // unique within the run
  std::string model;
  std::string service;
  std::string hostname;  // synthetic for sandboxes
  std::string root;      // private working area, as a view path
  std::optional<int> cores;             // declared capacity
  std::optional<uint64_t> memory_bytes;

  bool operator==(const Resource& other) const { return id == other.id; }
};

enum class CopyKind { local_to_remote, remote_to_local, remote_to_remote };

const char* to_string(CopyKind kind);

struct PathInfo {
  bool exists = false;
  bool is_directory = false;
  uint64_t size = 0;  // recursive payload bytes for directories
};

// The pluggable environment abstraction. One instance manages one model.
//
// Path conventions: remote endpoints use view paths (absolute within the
// resource's private filesystem view); the local endpoint of
// local_to_remote/remote_to_local uses management-node paths.
class Connector {
 public:
  virtual ~Connector() = default;

  virtual const std::string& model() const = 0;

  // Brings up all declared service replicas; returns the live resource set.
  // Calling twice is a programming error.
  virtual std::vector<Resource> deploy() = 0;

  // Destroys the model. Subsequent run/copy calls fail; a second undeploy
  // is an error.
  virtual void undeploy() = 0;

  // Destroys and recreates one service's replicas with clean state and
  // fresh resource ids.
  virtual std::vector<Resource> redeploy_service(const std::string& service) = 0;

  // Current replicas of a service; may vary between calls if the backing
  // orchestrator scales (sandboxes are static).
  virtual std::vector<Resource> get_available_resources(const std::string& service) = 0;

  // `kind` gives the transfer direction; `resource` is the remote endpoint
  // (destination for local_to_remote and remote_to_remote, source for
  // remote_to_local). remote_to_remote is only valid within one model and
  // takes the source resource explicitly.
  virtual void copy(const std::string& src, const std::string& dst,
                    const Resource& resource, CopyKind kind,
                    const std::optional<Resource>& src_resource = std::nullopt) = 0;

  // Executes a command on a resource with `workdir` as its working
  // directory; captures stdout verbatim. Nonzero exits are reported in the
  // result, not thrown.
  virtual CommandResult run(const Resource& resource, const std::string& command,
                            const std::map<std::string, std::string>& environment,
                            const std::string& workdir,
                            std::optional<double> timeout_sec = std::nullopt) = 0;

  // What a command executing on the resource must use to address a view
  // path: identity for real remote backends, the subtree mapping for
  // sandboxes.
  virtual std::string command_path(const Resource& resource,
                                   const std::string& view_path) const = 0;

  // Staging support used by the data manager and the job launcher.
  virtual PathInfo probe(const Resource& resource, const std::string& path) = 0;
  virtual std::vector<std::string> glob(const Resource& resource,
                                        const std::string& base,
                                        const std::string& pattern) = 0;
  virtual void make_dirs(const Resource& resource, const std::string& path) = 0;
  // True when a view path is visible identically from every resource of
  // this model (a shared data space).
  virtual bool is_shared_path(const std::string& path) const = 0;
  virtual uint64_t checksum(const Resource& resource, const std::string& path) = 0;
};

using ConnectorFactory = std::function<std::unique_ptr<Connector>(
    const ModelEntry&, const std::filesystem::path& sandbox_root)>;

class ConnectorRegistry {
 public:
  static ConnectorRegistry& instance();

  void register_type(const std::string& type, ConnectorFactory factory);
  bool has_type(const std::string& type) const;
  std::vector<std::string> types() const;
  std::unique_ptr<Connector> create(const ModelEntry& model,
                                    const std::filesystem::path& sandbox_root) const;

 private:
  ConnectorRegistry();
  std::map<std::string, ConnectorFactory> factories_;
};

}  // namespace streamflow
