#pragma once

#include <condition_variable>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "streamflow/config.hpp"
#include "streamflow/data_manager.hpp"
#include "streamflow/deployment.hpp"
#include "streamflow/events.hpp"
#include "streamflow/graph_transform.hpp"
#include "streamflow/report.hpp"
#include "streamflow/scheduler.hpp"
#include "streamflow/tokens.hpp"
#include "streamflow/workflow.hpp"

namespace streamflow {

struct RunOptions {
  bool serial = false;  // one job at a time, deterministic event order
  std::filesystem::path outdir = "streamflow-out";
  std::optional<std::filesystem::path> sandbox_root;  // default: <outdir>/sandbox
  bool verify_hash = false;  // content-hash the destination-existence probe
  std::string policy = "data-locality";
};

// recycle=false reuses live service resources across tasks (MTSC, the
// default); recycle=true redeploys the service first (STSC); a replicas
// directive fans the command out over N resources with rank variables
// (STMC).
struct MappingDirectives {
  bool redeploy_before = false;
  int ranks = 1;
  bool rank_env = false;
};

MappingDirectives apply_mapping_pattern(const Binding& binding);

inline constexpr const char* kRankVariable = "STREAMFLOW_RANK";
inline constexpr const char* kHostsVariable = "STREAMFLOW_HOSTS";

// Parse + static scatter expansion + binding resolution + input existence,
// without deploying anything. Shared by `validate` and the engine itself.
struct ValidatedWorkflow {
  WorkflowGraph graph;
  BindingTable bindings;
  std::filesystem::path dir;  // workflow document directory
};

ValidatedWorkflow validate_workflow(const StreamflowFile& file,
                                    const std::string& workflow_name);

// Drives one workflow end to end: lazy deployment, FCFS scheduling, input
// staging, rank fan-out, output registration, terminal gather, teardown.
class Engine {
 public:
  Engine(StreamflowFile file, std::string workflow_name, RunOptions options);
  ~Engine();

  // Executes every task to completion or failure, tears everything down and
  // returns the report (which the caller persists). Validation problems
  // throw ValidationError before anything is deployed.
  RunReport run();

 private:
  struct TaskRuntime {
    enum class State { waiting, submitted, completed, failed };
    State state = State::waiting;
    std::string job_id;
    std::string error;
  };

  struct JobRuntime {
    std::string id;
    std::string step;
    Binding binding;
    std::vector<Resource> resources;
    int ranks = 1;
    int exit_code = 0;
    std::string error;
    std::string stdout0;  // rank-0 stdout, for value outputs
    // resource id -> input name -> substitution (path or value content)
    std::map<std::string, std::map<std::string, std::string>> input_values;
  };

  // --- setup -------------------------------------------------------------
  void load_and_validate();
  void register_input_tokens();
  void rebuild_graph_state_locked();

  // --- execution ---------------------------------------------------------
  void run_concurrent();
  void run_serial();
  std::vector<std::pair<std::string, std::string>> collect_fireable_locked();
  void prep_task(const std::string& step, const std::string& job_id);
  void run_job(const TaskDescription& task, const std::vector<Resource>& resources);
  void launch_job(JobRuntime& job, const StepSpec& spec,
                  const MappingDirectives& directives);
  void stage_inputs(JobRuntime& job, const StepSpec& spec);
  void register_outputs(JobRuntime& job, const StepSpec& spec);
  void on_task_finished(const std::string& step, bool ok, const std::string& error);
  void fail_task_tree_locked(const std::string& step, const std::string& reason);
  void handle_stall();

  // --- helpers -----------------------------------------------------------
  TaskDescription make_task_description(const std::string& step,
                                        const std::string& job_id,
                                        const Binding& binding);
  std::string input_token_id(const StepSpec& spec, const InputSpec& input) const;
  std::string workdir_view(const Resource& resource, const std::string& job_id) const;
  std::string resolve_input_path(const std::string& token, const Resource& resource,
                                 const std::string& workdir,
                                 const std::string& input_name, int element);
  static std::string substitute_command(const StepSpec& spec,
                                        const std::map<std::string, std::string>& values);
  void update_model_counters_locked();
  void collect_terminal_outputs();
  RunReport assemble_report();
  void spawn(std::function<void()> fn);
  void join_workers();
  bool all_terminal_locked() const;

  StreamflowFile file_;
  std::string workflow_name_;
  RunOptions options_;
  std::filesystem::path workflow_dir_;

  EventLog events_;
  TokenStore tokens_;
  std::unique_ptr<DeploymentManager> deployments_;
  std::unique_ptr<DataManager> data_;
  std::unique_ptr<Scheduler> scheduler_;

  mutable std::mutex mutex_;
  std::condition_variable done_cv_;
  WorkflowGraph graph_;
  BindingTable bindings_;
  TransformedGraph tgraph_;
  std::map<std::string, TaskRuntime> tasks_;
  std::map<std::string, JobRuntime> jobs_;
  std::map<std::string, int> model_remaining_;  // tasks still owed per model
  std::set<std::string> model_finish_emitted_;
  int next_job_ = 1;
  std::vector<OutputRecord> outputs_;
  std::vector<std::string> teardown_failures_;

  std::mutex workers_mutex_;
  std::vector<std::thread> workers_;
};

}  // namespace streamflow
