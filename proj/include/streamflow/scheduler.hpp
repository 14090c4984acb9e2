#pragma once

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "streamflow/config.hpp"
#include "streamflow/connector.hpp"
#include "streamflow/data_manager.hpp"
#include "streamflow/events.hpp"
#include "streamflow/workflow.hpp"

namespace streamflow {

struct TaskDescription {
  std::string step;    // task node id
  std::string job_id;
  Requirements requirements;
  std::vector<std::string> data_deps;  // token ids
  Target target;
  int replicas = 1;
  bool recycle = false;
};

enum class JobStatus { pending, running, completed, failed };

const char* to_string(JobStatus status);

struct JobAllocation {
  std::string job_id;
  TaskDescription task;
  std::vector<Resource> resources;
  JobStatus status = JobStatus::pending;
};

struct ResourceAllocation {
  Resource resource;
  std::vector<std::string> jobs;  // every non-terminal job placed here
};

struct PolicyInput {
  const TaskDescription& task;
  const std::vector<Resource>& available;  // all match the task's target
  const std::map<std::string, std::vector<DataLocation>>& remote_paths;
  const std::map<std::string, JobAllocation>& job_allocations;
  const std::map<std::string, ResourceAllocation>& resource_allocations;
};

// Pluggable scheduling strategy: one resource per call.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual const char* name() const = 0;
  virtual std::optional<Resource> get_resource(const PolicyInput& input) = 0;
};

// Default strategy: candidates holding at least one of the task's data
// dependencies come first (data locality), ties broken lexicographically by
// resource id; picks the first free candidate that satisfies the declared
// resource requirements.
class DataLocalityPolicy : public Policy {
 public:
  const char* name() const override { return "data-locality"; }
  std::optional<Resource> get_resource(const PolicyInput& input) override;
};

std::unique_ptr<Policy> make_policy(const std::string& name);

// FCFS, non-preemptive task-to-resource assignment. One logical critical
// section: policy invocations are serialized; completion notifications may
// arrive from any thread and re-scan the waiting queue in FCFS order.
class Scheduler {
 public:
  // Invoked (still inside the critical section) when a queued task is
  // placed during a completion re-scan. Must not call back into the
  // scheduler synchronously.
  using PlacementHook =
      std::function<void(const TaskDescription&, const std::vector<Resource>&)>;
  // Quiesced-service hook for recycle bindings: performs the durable-copy
  // check plus service redeployment and returns the fresh resource pool.
  using RecycleHook = std::function<void(const TaskDescription&)>;

  Scheduler(DeploymentManager& deployments, DataManager& data, EventLog& events,
            std::unique_ptr<Policy> policy);

  void set_placement_hook(PlacementHook hook) { placement_hook_ = std::move(hook); }
  void set_recycle_hook(RecycleHook hook) { recycle_hook_ = std::move(hook); }

  // Returns the assigned resources, or nullopt when the task was queued
  // (it will be offered resources by a later completion re-scan, FCFS).
  std::optional<std::vector<Resource>> schedule(const TaskDescription& task);

  // Bookkeeping update + waiting-queue re-scan. Throws SchedulerError for
  // unknown jobs and illegal transitions.
  void notify_completion(const std::string& job_id, JobStatus status);

  // Drops a queued task (upstream failure before placement).
  void cancel(const std::string& job_id);

  // Queued tasks that can never run because nothing is running anymore.
  // Returns them in FCFS order and empties the queue.
  std::vector<TaskDescription> drain_if_stalled();

  std::map<std::string, JobAllocation> job_allocations() const;
  std::map<std::string, ResourceAllocation> resource_allocations() const;
  size_t queue_length() const;
  const char* policy_name() const { return policy_->name(); }

 private:
  bool try_place(const TaskDescription& task, std::vector<Resource>& placed);
  bool queue_has_same_service(const Target& target) const;
  bool any_running() const;
  void commit(const TaskDescription& task, const std::vector<Resource>& resources);

  DeploymentManager& deployments_;
  DataManager& data_;
  EventLog& events_;
  std::unique_ptr<Policy> policy_;
  PlacementHook placement_hook_;
  RecycleHook recycle_hook_;

  mutable std::mutex mutex_;
  std::deque<TaskDescription> queue_;
  std::map<std::string, JobAllocation> jobs_;
  std::map<std::string, ResourceAllocation> resources_;
  std::set<std::string> recycled_jobs_;  // recycle hook fired (once per task)
};

}  // namespace streamflow
