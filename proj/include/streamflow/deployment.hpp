#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "streamflow/config.hpp"
#include "streamflow/connector.hpp"
#include "streamflow/events.hpp"

namespace streamflow {

enum class ModelState { pending, deploying, deployed, undeployed, failed };

const char* to_string(ModelState state);

// Model lifecycle owner. Deployment is lazy: ensure_deployed is called when
// the first dependent task becomes fireable, concurrent first calls perform
// exactly one deploy, and undeploy_all tears everything down at the end of
// the run (success or unrecoverable failure alike).
class DeploymentManager {
 public:
  DeploymentManager(const StreamflowFile& file, std::filesystem::path sandbox_root,
                    EventLog& events);

  // Exactly-once deployment per model; external models are attached via
  // get_available_resources instead of deployed. Throws on undeclared
  // models and propagates connector failures (marking the model failed).
  std::vector<Resource> ensure_deployed(const std::string& model);

  // Service recreation for recycle bindings. The caller is responsible for
  // securing durable copies of outputs first (DataManager::make_durable).
  std::vector<Resource> redeploy_service(const std::string& model,
                                         const std::string& service);

  // Undeploys every deployed, non-external model; collects errors and
  // throws TeardownError after all attempts. A second call is a no-op.
  void undeploy_all();

  Connector& connector(const std::string& model);
  ModelState state(const std::string& model) const;
  bool is_external(const std::string& model) const;
  std::vector<std::string> model_names() const;
  std::vector<Resource> resources(const std::string& model) const;
  int deploy_count(const std::string& model) const;
  int redeploy_count(const std::string& model) const;

 private:
  struct Entry {
    std::unique_ptr<Connector> connector;
    bool external = false;
    std::vector<std::string> services;
    ModelState state = ModelState::pending;
    std::vector<Resource> resources;
    int deploy_count = 0;
    int redeploy_count = 0;
    std::string error;
    mutable std::mutex mutex;
  };

  Entry& entry(const std::string& model);
  const Entry& entry(const std::string& model) const;

  std::map<std::string, std::unique_ptr<Entry>> entries_;
  EventLog& events_;
  std::mutex undeploy_mutex_;
  bool undeploy_done_ = false;
};

}  // namespace streamflow
