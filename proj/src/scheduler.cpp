#include "streamflow/scheduler.hpp"

#include <algorithm>
#include <set>

#include "streamflow/errors.hpp"

namespace streamflow {

const char* to_string(JobStatus status) {
  switch (status) {
    case JobStatus::pending: return "pending";
    case JobStatus::running: return "running";
    case JobStatus::completed: return "completed";
    case JobStatus::failed: return "failed";
  }
  return "?";
}

std::optional<Resource> DataLocalityPolicy::get_resource(const PolicyInput& input) {
  // Resources already holding one of the task's dependencies come first.
  std::set<std::string> holders;
  for (const auto& dep : input.task.data_deps) {
    auto it = input.remote_paths.find(dep);
    if (it == input.remote_paths.end()) continue;
    for (const auto& loc : it->second) {
      if (loc.resource) holders.insert(loc.resource->id);
    }
  }

  std::vector<Resource> candidates = input.available;
  std::stable_sort(candidates.begin(), candidates.end(),
                   [&](const Resource& a, const Resource& b) {
                     bool ha = holders.count(a.id) > 0;
                     bool hb = holders.count(b.id) > 0;
                     if (ha != hb) return ha;
                     return a.id < b.id;
                   });

  for (const auto& r : candidates) {
    auto it = input.resource_allocations.find(r.id);
    if (it != input.resource_allocations.end()) {
      bool busy = false;
      for (const auto& job_id : it->second.jobs) {
        auto jit = input.job_allocations.find(job_id);
        if (jit != input.job_allocations.end() &&
            jit->second.status == JobStatus::running) {
          busy = true;
          break;
        }
      }
      if (busy) continue;
    }
    // Declared capacity must cover declared requirements; anything
    // unspecified passes.
    if (input.task.requirements.cores && r.cores &&
        *r.cores < *input.task.requirements.cores) {
      continue;
    }
    if (input.task.requirements.memory_bytes && r.memory_bytes &&
        *r.memory_bytes < *input.task.requirements.memory_bytes) {
      continue;
    }
    return r;
  }
  return std::nullopt;
}

std::unique_ptr<Policy> make_policy(const std::string& name) {
  if (name == "data-locality") return std::make_unique<DataLocalityPolicy>();
  throw ValidationError("policy", "unknown scheduling policy '" + name + "'");
}

Scheduler::Scheduler(DeploymentManager& deployments, DataManager& data,
                     EventLog& events, std::unique_ptr<Policy> policy)
    : deployments_(deployments), data_(data), events_(events),
      policy_(std::move(policy)) {}

bool Scheduler::queue_has_same_service(const Target& target) const {
  for (const auto& task : queue_) {
    if (task.target == target) return true;
  }
  return false;
}

bool Scheduler::any_running() const {
  for (const auto& [_, job] : jobs_) {
    if (job.status == JobStatus::running) return true;
  }
  return false;
}

bool Scheduler::try_place(const TaskDescription& task, std::vector<Resource>& placed) {
  if (task.recycle) {
    // STSC: the service must be quiescent, then it is redeployed so the
    // task starts in a clean environment.
    for (const auto& [_, job] : jobs_) {
      if (job.status == JobStatus::running && job.task.target == task.target) {
        return false;
      }
    }
    if (recycle_hook_ && recycled_jobs_.insert(task.job_id).second) {
      recycle_hook_(task);
    }
  }

  auto available = deployments_.connector(task.target.model)
                       .get_available_resources(task.target.service);
  auto remote_paths = data_.snapshot();

  std::vector<Resource> pool = available;
  placed.clear();
  for (int i = 0; i < task.replicas; ++i) {
    PolicyInput input{task, pool, remote_paths, jobs_, resources_};
    auto choice = policy_->get_resource(input);
    if (!choice) {
      placed.clear();  // all-or-nothing: roll back partial selections
      return false;
    }
    placed.push_back(*choice);
    std::erase_if(pool, [&](const Resource& r) { return r.id == choice->id; });
  }

  json fields;
  fields["job"] = task.job_id;
  fields["step"] = task.step;
  fields["candidates"] = json::array();
  for (const auto& r : available) fields["candidates"].push_back(r.id);
  fields["chosen"] = json::array();
  for (const auto& r : placed) fields["chosen"].push_back(r.id);
  fields["queue_length"] = queue_.size();
  events_.emit(ev::job_scheduled, fields);

  commit(task, placed);
  return true;
}

void Scheduler::commit(const TaskDescription& task, const std::vector<Resource>& chosen) {
  auto& job = jobs_[task.job_id];
  job.job_id = task.job_id;
  job.task = task;
  job.resources = chosen;
  job.status = JobStatus::running;
  for (const auto& r : chosen) {
    auto [it, inserted] = resources_.try_emplace(r.id, ResourceAllocation{r, {}});
    it->second.resource = r;
    it->second.jobs.push_back(task.job_id);
  }
}

std::optional<std::vector<Resource>> Scheduler::schedule(const TaskDescription& task) {
  std::lock_guard lock(mutex_);
  if (jobs_.count(task.job_id)) {
    throw SchedulerError("job '" + task.job_id + "' already scheduled");
  }
  events_.emit(ev::job_queued, {{"job", task.job_id},
                                {"step", task.step},
                                {"model", task.target.model},
                                {"service", task.target.service}});
  jobs_[task.job_id] = JobAllocation{task.job_id, task, {}, JobStatus::pending};

  // FCFS per service: never overtake an earlier task waiting for the same
  // service.
  std::vector<Resource> placed;
  if (!queue_has_same_service(task.target) && try_place(task, placed)) {
    return placed;
  }
  queue_.push_back(task);
  return std::nullopt;
}

void Scheduler::notify_completion(const std::string& job_id, JobStatus status) {
  std::vector<std::pair<TaskDescription, std::vector<Resource>>> placements;
  {
    std::lock_guard lock(mutex_);
    auto it = jobs_.find(job_id);
    if (it == jobs_.end()) {
      throw SchedulerError("unknown job '" + job_id + "'");
    }
    if (it->second.status != JobStatus::running) {
      throw SchedulerError("job '" + job_id + "' is " + to_string(it->second.status) +
                           ", not running (duplicate or premature notification)");
    }
    if (status != JobStatus::completed && status != JobStatus::failed) {
      throw SchedulerError("illegal transition for job '" + job_id + "'");
    }
    it->second.status = status;
    for (const auto& r : it->second.resources) {
      auto rit = resources_.find(r.id);
      if (rit != resources_.end()) {
        std::erase(rit->second.jobs, job_id);
      }
    }

    // Re-scan the waiting queue in FCFS order.
    for (auto qit = queue_.begin(); qit != queue_.end();) {
      std::vector<Resource> placed;
      if (try_place(*qit, placed)) {
        placements.emplace_back(*qit, placed);
        qit = queue_.erase(qit);
      } else {
        ++qit;
      }
    }
  }
  for (auto& [task, resources] : placements) {
    if (placement_hook_) placement_hook_(task, resources);
  }
}

void Scheduler::cancel(const std::string& job_id) {
  std::lock_guard lock(mutex_);
  std::erase_if(queue_, [&](const TaskDescription& t) { return t.job_id == job_id; });
  auto it = jobs_.find(job_id);
  if (it != jobs_.end() && it->second.status == JobStatus::pending) {
    it->second.status = JobStatus::failed;
  }
}

std::vector<TaskDescription> Scheduler::drain_if_stalled() {
  std::lock_guard lock(mutex_);
  if (queue_.empty() || any_running()) return {};
  // Nothing is running, so no completion will ever re-scan the queue: the
  // remaining tasks are unschedulable (mismatched replicas/requirements).
  std::vector<TaskDescription> out(queue_.begin(), queue_.end());
  json fields;
  fields["tasks"] = json::array();
  for (const auto& t : out) fields["tasks"].push_back(t.step);
  events_.emit(ev::scheduler_stall, fields);
  queue_.clear();
  for (const auto& t : out) {
    auto it = jobs_.find(t.job_id);
    if (it != jobs_.end()) it->second.status = JobStatus::failed;
  }
  return out;
}

std::map<std::string, JobAllocation> Scheduler::job_allocations() const {
  std::lock_guard lock(mutex_);
  return jobs_;
}

std::map<std::string, ResourceAllocation> Scheduler::resource_allocations() const {
  std::lock_guard lock(mutex_);
  return resources_;
}

size_t Scheduler::queue_length() const {
  std::lock_guard lock(mutex_);
  return queue_.size();
}

}  // namespace streamflow
