#include "streamflow/deployment.hpp"

#include "streamflow/errors.hpp"

namespace streamflow {

const char* to_string(ModelState state) {
  switch (state) {
    case ModelState::pending: return "pending";
    case ModelState::deploying: return "deploying";
    case ModelState::deployed: return "deployed";
    case ModelState::undeployed: return "undeployed";
    case ModelState::failed: return "failed";
  }
  return "?";
}

DeploymentManager::DeploymentManager(const StreamflowFile& file,
                                     std::filesystem::path sandbox_root,
                                     EventLog& events)
    : events_(events) {
  for (const auto& [name, model] : file.models) {
    auto e = std::make_unique<Entry>();
    e->connector = ConnectorRegistry::instance().create(model, sandbox_root);
    e->external = model.external;
    e->services = validate_service_names(model);
    entries_.emplace(name, std::move(e));
  }
}

DeploymentManager::Entry& DeploymentManager::entry(const std::string& model) {
  auto it = entries_.find(model);
  if (it == entries_.end()) {
    throw EngineError("model '" + model + "' is not declared in the streamflow file");
  }
  return *it->second;
}

const DeploymentManager::Entry& DeploymentManager::entry(const std::string& model) const {
  auto it = entries_.find(model);
  if (it == entries_.end()) {
    throw EngineError("model '" + model + "' is not declared in the streamflow file");
  }
  return *it->second;
}

std::vector<Resource> DeploymentManager::ensure_deployed(const std::string& model) {
  Entry& e = entry(model);
  // Per-model lock: concurrent first calls perform one deploy, deploys of
  // distinct models proceed in parallel.
  std::lock_guard lock(e.mutex);
  switch (e.state) {
    case ModelState::deployed:
      return e.resources;
    case ModelState::failed:
      throw EngineError("model '" + model + "' failed to deploy: " + e.error);
    case ModelState::undeployed:
      throw EngineError("model '" + model + "' was already undeployed");
    case ModelState::deploying:
      // unreachable while the lock is held
      throw EngineError("model '" + model + "' is mid-deployment");
    case ModelState::pending:
      break;
  }
  e.state = ModelState::deploying;
  try {
    if (e.external) {
      // External models are attached, not deployed: resources come from
      // get_available_resources at first use.
      std::vector<Resource> all;
      for (const auto& svc : e.services) {
        auto resources = e.connector->get_available_resources(svc);
        all.insert(all.end(), resources.begin(), resources.end());
      }
      e.resources = std::move(all);
      e.state = ModelState::deployed;
      json fields;
      fields["model"] = model;
      fields["resources"] = json::array();
      for (const auto& r : e.resources) fields["resources"].push_back(r.id);
      events_.emit(ev::model_attached, fields);
    } else {
      events_.emit(ev::model_deploying, {{"model", model}});
      e.resources = e.connector->deploy();
      e.deploy_count++;
      e.state = ModelState::deployed;
      json fields;
      fields["model"] = model;
      fields["resources"] = json::array();
      for (const auto& r : e.resources) fields["resources"].push_back(r.id);
      events_.emit(ev::model_deployed, fields);
    }
  } catch (const std::exception& ex) {
    e.state = ModelState::failed;
    e.error = ex.what();
    events_.emit(ev::model_deploy_failed, {{"model", model}, {"error", e.error}});
    throw EngineError("model '" + model + "' failed to deploy: " + e.error);
  }
  return e.resources;
}

std::vector<Resource> DeploymentManager::redeploy_service(const std::string& model,
                                                          const std::string& service) {
  Entry& e = entry(model);
  std::lock_guard lock(e.mutex);
  if (e.state != ModelState::deployed) {
    throw EngineError("cannot redeploy service '" + service + "': model '" + model +
                      "' is " + to_string(e.state));
  }
  if (e.external) {
    throw EngineError("externally managed model '" + model + "' cannot be recycled");
  }
  auto fresh = e.connector->redeploy_service(service);
  e.redeploy_count++;
  std::erase_if(e.resources, [&](const Resource& r) { return r.service == service; });
  e.resources.insert(e.resources.end(), fresh.begin(), fresh.end());
  json fields;
  fields["model"] = model;
  fields["service"] = service;
  fields["resources"] = json::array();
  for (const auto& r : fresh) fields["resources"].push_back(r.id);
  events_.emit(ev::service_redeployed, fields);
  return fresh;
}

void DeploymentManager::undeploy_all() {
  std::lock_guard guard(undeploy_mutex_);
  if (undeploy_done_) return;
  undeploy_done_ = true;
  std::vector<std::string> failures;
  for (auto& [name, e] : entries_) {
    std::lock_guard lock(e->mutex);
    if (e->state != ModelState::deployed || e->external) continue;
    try {
      e->connector->undeploy();
      e->state = ModelState::undeployed;
      events_.emit(ev::model_undeployed, {{"model", name}});
    } catch (const std::exception& ex) {
      failures.push_back(name + ": " + ex.what());
      events_.emit(ev::model_undeploy_failed, {{"model", name}, {"error", ex.what()}});
    }
  }
  if (!failures.empty()) throw TeardownError(std::move(failures));
}

Connector& DeploymentManager::connector(const std::string& model) {
  return *entry(model).connector;
}

ModelState DeploymentManager::state(const std::string& model) const {
  const Entry& e = entry(model);
  std::lock_guard lock(e.mutex);
  return e.state;
}

bool DeploymentManager::is_external(const std::string& model) const {
  return entry(model).external;
}

std::vector<std::string> DeploymentManager::model_names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : entries_) out.push_back(name);
  return out;
}

std::vector<Resource> DeploymentManager::resources(const std::string& model) const {
  const Entry& e = entry(model);
  std::lock_guard lock(e.mutex);
  return e.resources;
}

int DeploymentManager::deploy_count(const std::string& model) const {
  const Entry& e = entry(model);
  std::lock_guard lock(e.mutex);
  return e.deploy_count;
}

int DeploymentManager::redeploy_count(const std::string& model) const {
  const Entry& e = entry(model);
  std::lock_guard lock(e.mutex);
  return e.redeploy_count;
}

}  // namespace streamflow
