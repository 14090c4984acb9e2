#pragma once

#include <chrono>
#include <cstdint>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

namespace streamflow {

using json = nlohmann::json;

// Well-known event kinds emitted into the run log.
namespace ev {
inline constexpr const char* model_deploying = "model.deploying";
inline constexpr const char* model_deployed = "model.deployed";
inline constexpr const char* model_attached = "model.attached";
inline constexpr const char* model_deploy_failed = "model.deploy_failed";
inline constexpr const char* model_undeployed = "model.undeployed";
inline constexpr const char* model_undeploy_failed = "model.undeploy_failed";
inline constexpr const char* model_last_task_finished = "model.last_task_finished";
inline constexpr const char* service_redeployed = "service.redeployed";
inline constexpr const char* job_queued = "job.queued";
inline constexpr const char* job_scheduled = "job.scheduled";
inline constexpr const char* job_staged = "job.staged";
inline constexpr const char* job_started = "job.started";
inline constexpr const char* job_finished = "job.finished";
inline constexpr const char* task_failed = "task.failed";
inline constexpr const char* copy = "copy";
inline constexpr const char* transfer_skipped = "transfer.skipped";
inline constexpr const char* scheduler_stall = "scheduler.stall";
}  // namespace ev

struct Event {
  uint64_t seq = 0;
  double t = 0.0;  // seconds since run start
  std::string kind;
  json fields;

  json to_json() const;
  static Event from_json(const json& j);
};

// Append-only, thread-safe run log with a total order (seq) and relative
// timestamps. This is the ground truth consumed by the reporter and the
// acceptance tests.
class EventLog {
 public:
  EventLog() : start_(std::chrono::steady_clock::now()) {}

  uint64_t emit(std::string kind, json fields = json::object());
  std::vector<Event> snapshot() const;
  double now() const;

 private:
  mutable std::mutex mutex_;
  std::vector<Event> events_;
  std::chrono::steady_clock::time_point start_;
  uint64_t next_seq_ = 0;
};

}  // namespace streamflow
