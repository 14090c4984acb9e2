#pragma once

#include <mutex>

#include "streamflow/connector.hpp"

namespace streamflow {

// Desk-scale stand-in for a remote multi-container environment: one
// directory subtree per resource on the management node's filesystem, with
// `run` executed as a subprocess confined to that subtree. Registered as
// "sandbox" (fully disjoint data spaces) and "sandbox-shared" (with
// shared_mounts prefixes visible identically from every resource).
//
// Layout under root_dir():
//   <root>/<resource-id>/...   private view of one resource
//   <root>/shared/...          backing store for shared mount prefixes
// Undeploy removes the tree, or renames it to "<root>.archived" when
// archive_on_undeploy is set.
class SandboxConnector : public Connector {
 public:
  SandboxConnector(ModelEntry entry, std::filesystem::path root_dir);

  const std::string& model() const override { return entry_.name; }
  const std::filesystem::path& root_dir() const { return root_; }

  std::vector<Resource> deploy() override;
  void undeploy() override;
  std::vector<Resource> redeploy_service(const std::string& service) override;
  std::vector<Resource> get_available_resources(const std::string& service) override;

  void copy(const std::string& src, const std::string& dst, const Resource& resource,
            CopyKind kind,
            const std::optional<Resource>& src_resource = std::nullopt) override;
  CommandResult run(const Resource& resource, const std::string& command,
                    const std::map<std::string, std::string>& environment,
                    const std::string& workdir,
                    std::optional<double> timeout_sec = std::nullopt) override;

  std::string command_path(const Resource& resource,
                           const std::string& view_path) const override;
  PathInfo probe(const Resource& resource, const std::string& path) override;
  std::vector<std::string> glob(const Resource& resource, const std::string& base,
                                const std::string& pattern) override;
  void make_dirs(const Resource& resource, const std::string& path) override;
  bool is_shared_path(const std::string& path) const override;
  uint64_t checksum(const Resource& resource, const std::string& path) override;

  // View-to-real mapping (shared prefixes land in the model-wide shared
  // store). Exposed for tests that assert on-disk layout.
  std::filesystem::path real_path(const Resource& resource,
                                  const std::string& view_path) const;

 private:
  std::vector<Resource> provision_service(const ServiceConfig& svc, int generation);
  void require_live(const Resource& resource) const;
  void check_usable() const;  // deployed (or attached external), not torn down

  ModelEntry entry_;
  std::filesystem::path root_;

  mutable std::mutex mutex_;
  bool deployed_ = false;
  bool undeployed_ = false;
  std::map<std::string, std::vector<Resource>> live_;  // service -> resources
  std::map<std::string, int> generation_;
};

}  // namespace streamflow
