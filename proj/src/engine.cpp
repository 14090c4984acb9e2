#include "streamflow/engine.hpp"

#include <algorithm>
#include <chrono>
#include <deque>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "streamflow/errors.hpp"
#include "streamflow/util.hpp"

namespace streamflow {

namespace fs = std::filesystem;

MappingDirectives apply_mapping_pattern(const Binding& binding) {
  MappingDirectives d;
  d.redeploy_before = binding.recycle;
  d.ranks = binding.effective_replicas();
  d.rank_env = binding.replicas.has_value();
  return d;
}

namespace {

std::string make_run_id() {
  auto now = std::chrono::system_clock::now().time_since_epoch();
  return fmt::format(
      "run-{:x}", std::chrono::duration_cast<std::chrono::microseconds>(now).count());
}

}  // namespace

Engine::Engine(StreamflowFile file, std::string workflow_name, RunOptions options)
    : file_(std::move(file)),
      workflow_name_(std::move(workflow_name)),
      options_(std::move(options)) {}

Engine::~Engine() { join_workers(); }

// ---------------------------------------------------------------------------
// Setup
// ---------------------------------------------------------------------------

namespace {

// Scatter over a workflow input list (or with an explicit cardinality
// override) has a statically known fan-out; everything else expands at run
// time when the producing list token materializes.
WorkflowGraph expand_static(WorkflowGraph graph) {
  for (int guard = 0; guard < 10000; ++guard) {
    bool expanded = false;
    for (const auto& [id, spec] : graph.steps()) {
      if (!spec.scatter) continue;
      int cardinality = -1;
      if (spec.scatter_cardinality) {
        cardinality = *spec.scatter_cardinality;
      } else {
        const InputSpec* in = spec.find_input(*spec.scatter);
        if (in && in->source.kind == InputRef::Kind::workflow_input) {
          cardinality = static_cast<int>(
              graph.inputs().at(in->source.input_name).entries.size());
          if (cardinality == 0) {
            throw ValidationError(id, "empty scatter: workflow input '" +
                                          in->source.input_name + "' has no entries");
          }
        }
      }
      if (cardinality > 0) {
        graph = expand_scatter(graph, id, cardinality);
        expanded = true;
        break;
      }
    }
    if (!expanded) return graph;
  }
  throw EngineError("scatter expansion did not converge");
}

}  // namespace

ValidatedWorkflow validate_workflow(const StreamflowFile& file,
                                    const std::string& workflow_name) {
  auto it = file.workflows.find(workflow_name);
  if (it == file.workflows.end()) {
    throw ValidationError("workflows." + workflow_name, "unknown workflow");
  }
  fs::path wf_path = file.base_dir / it->second.file;
  if (!fs::exists(wf_path)) {
    throw ValidationError("workflows." + workflow_name + ".config.file",
                          "workflow document not found: " + wf_path.string());
  }
  ValidatedWorkflow out;
  out.dir = fs::absolute(wf_path).parent_path();
  out.graph = expand_static(parse_workflow_file(wf_path));
  out.bindings = resolve_bindings(file, workflow_name, out.graph);

  for (const auto& [name, input] : out.graph.inputs()) {
    if (input.kind == DataKind::value) continue;
    for (const auto& entry : input.entries) {
      fs::path p = entry;
      if (p.is_relative()) p = out.dir / p;
      if (!fs::exists(p)) {
        throw ValidationError("inputs." + name, "input path not found: " + p.string());
      }
    }
  }
  return out;
}

void Engine::load_and_validate() {
  ValidatedWorkflow validated = validate_workflow(file_, workflow_name_);
  workflow_dir_ = validated.dir;
  graph_ = std::move(validated.graph);
  bindings_ = std::move(validated.bindings);
  tgraph_ = transform_graph(graph_, bindings_);

  fs::create_directories(options_.outdir / "outputs");
  std::lock_guard lock(mutex_);
  rebuild_graph_state_locked();
}

void Engine::rebuild_graph_state_locked() {
  bindings_ = resolve_bindings(file_, workflow_name_, graph_);
  tgraph_ = transform_graph(graph_, bindings_);
  // Expansion replaces waiting steps with their instances; anything already
  // submitted or terminal must survive unchanged.
  for (auto it = tasks_.begin(); it != tasks_.end();) {
    if (!graph_.has_step(it->first)) {
      if (it->second.state != TaskRuntime::State::waiting) {
        throw EngineError("step '" + it->first + "' vanished while " +
                          (it->second.state == TaskRuntime::State::submitted
                               ? "submitted"
                               : "terminal"));
      }
      it = tasks_.erase(it);
    } else {
      ++it;
    }
  }
  for (const auto& [id, _] : graph_.steps()) {
    tasks_.try_emplace(id);
  }
}

void Engine::register_input_tokens() {
  auto make_file_token = [&](const std::string& id, const std::string& name,
                             const std::string& entry) {
    fs::path p = entry;
    if (p.is_relative()) p = workflow_dir_ / p;
    p = fs::absolute(p);
    DataToken tok;
    tok.id = id;
    tok.name = name;
    tok.kind = fs::is_directory(p) ? DataKind::directory : DataKind::file;
    tokens_.put(tok);
    data_->add_remote_path_mapping(id, std::nullopt, p.string());
  };

  for (const auto& [name, input] : graph_.inputs()) {
    std::string base = "input:" + name;
    if (input.list) {
      std::vector<std::string> children;
      for (size_t i = 0; i < input.entries.size(); ++i) {
        std::string child = base + "[" + std::to_string(i) + "]";
        if (input.kind == DataKind::value) {
          tokens_.put(DataToken{child, DataKind::value, name, input.entries[i],
                                std::nullopt});
        } else {
          make_file_token(child, name, input.entries[i]);
        }
        children.push_back(child);
      }
      tokens_.put(DataToken{base, input.kind, name, std::nullopt, children});
    } else if (input.kind == DataKind::value) {
      tokens_.put(DataToken{base, DataKind::value, name, input.entries.at(0),
                            std::nullopt});
    } else {
      make_file_token(base, name, input.entries.at(0));
    }
  }
}

// ---------------------------------------------------------------------------
// Run loop
// ---------------------------------------------------------------------------

RunReport Engine::run() {
  options_.outdir = fs::absolute(options_.outdir);
  load_and_validate();

  fs::path sandbox_root =
      fs::absolute(options_.sandbox_root.value_or(options_.outdir / "sandbox"));
  deployments_ = std::make_unique<DeploymentManager>(file_, sandbox_root, events_);
  data_ = std::make_unique<DataManager>(tokens_, *deployments_,
                                        options_.outdir / "staging", events_,
                                        options_.verify_hash);
  scheduler_ = std::make_unique<Scheduler>(*deployments_, *data_, events_,
                                           make_policy(options_.policy));
  scheduler_->set_placement_hook(
      [this](const TaskDescription& task, const std::vector<Resource>& resources) {
        spawn([this, task, resources] { run_job(task, resources); });
      });
  scheduler_->set_recycle_hook([this](const TaskDescription& task) {
    // STSC durability: secure outputs living only on the doomed replicas,
    // then recreate the service.
    auto current = deployments_->connector(task.target.model)
                       .get_available_resources(task.target.service);
    std::vector<std::string> ids;
    for (const auto& r : current) ids.push_back(r.id);
    data_->make_durable(ids);
    deployments_->redeploy_service(task.target.model, task.target.service);
    for (const auto& id : ids) data_->invalidate_resource(id);
  });

  register_input_tokens();

  try {
    if (options_.serial) {
      run_serial();
    } else {
      run_concurrent();
    }
    join_workers();
    collect_terminal_outputs();
  } catch (const std::exception& ex) {
    spdlog::error("workflow '{}' aborted: {}", workflow_name_, ex.what());
    events_.emit(ev::task_failed, {{"step", "*"}, {"reason", ex.what()}});
    join_workers();
    std::lock_guard lock(mutex_);
    for (auto& [id, t] : tasks_) {
      if (t.state == TaskRuntime::State::waiting ||
          t.state == TaskRuntime::State::submitted) {
        t.state = TaskRuntime::State::failed;
        t.error = std::string("engine aborted: ") + ex.what();
      }
    }
  }

  try {
    deployments_->undeploy_all();
  } catch (const TeardownError& ex) {
    teardown_failures_ = ex.failures();
  }
  return assemble_report();
}

void Engine::run_concurrent() {
  std::vector<std::pair<std::string, std::string>> initial;
  {
    std::lock_guard lock(mutex_);
    initial = collect_fireable_locked();
  }
  for (const auto& [step, job_id] : initial) {
    spawn([this, step = step, job_id = job_id] { prep_task(step, job_id); });
  }
  std::unique_lock lock(mutex_);
  done_cv_.wait(lock, [&] { return all_terminal_locked(); });
}

void Engine::run_serial() {
  while (true) {
    std::vector<std::pair<std::string, std::string>> batch;
    {
      std::lock_guard lock(mutex_);
      if (all_terminal_locked()) return;
      batch = collect_fireable_locked();
    }
    if (batch.empty()) {
      handle_stall();
      std::lock_guard lock(mutex_);
      if (all_terminal_locked()) return;
      // No fireable task, nothing queued, not everything terminal: this
      // cannot happen on a validated DAG.
      throw EngineError("serial loop wedged with non-terminal tasks");
    }
    for (const auto& [step, job_id] : batch) {
      prep_task(step, job_id);
    }
  }
}

bool Engine::all_terminal_locked() const {
  for (const auto& [_, t] : tasks_) {
    if (t.state == TaskRuntime::State::waiting ||
        t.state == TaskRuntime::State::submitted) {
      return false;
    }
  }
  return true;
}

std::vector<std::pair<std::string, std::string>> Engine::collect_fireable_locked() {
  std::vector<std::pair<std::string, std::string>> out;
  for (int guard = 0; guard < 10000; ++guard) {
    std::set<std::string> completed;
    for (const auto& [id, t] : tasks_) {
      if (t.state == TaskRuntime::State::completed) completed.insert(id);
    }
    bool expanded = false;
    for (const auto& step : fireable_set(tgraph_, completed)) {
      auto& t = tasks_.at(step);
      if (t.state != TaskRuntime::State::waiting) continue;
      const StepSpec& spec = graph_.step(step);
      if (spec.scatter) {
        // Dynamic expansion: the producing token has materialized, so the
        // fan-out is known now.
        const InputSpec* in = spec.find_input(*spec.scatter);
        const DataToken& tok = tokens_.get(input_token_id(spec, *in));
        int cardinality = tok.is_list() ? static_cast<int>(tok.children->size()) : -1;
        if (cardinality <= 0) {
          fail_task_tree_locked(step, cardinality == 0
                                          ? "empty scatter: list '" + tok.id +
                                                "' has no elements"
                                          : "scatter over non-list token '" + tok.id +
                                                "'");
          update_model_counters_locked();
        } else {
          graph_ = expand_scatter(graph_, step, cardinality);
          rebuild_graph_state_locked();
        }
        expanded = true;
        break;
      }
      t.state = TaskRuntime::State::submitted;
      t.job_id = fmt::format("job-{:04d}", next_job_++);
      out.push_back({step, t.job_id});
    }
    if (!expanded) return out;
  }
  throw EngineError("scatter expansion did not converge");
}

void Engine::prep_task(const std::string& step, const std::string& job_id) {
  try {
    Binding binding;
    {
      std::lock_guard lock(mutex_);
      binding = bindings_.lookup(step);
    }
    deployments_->ensure_deployed(binding.target.model);
    TaskDescription task = make_task_description(step, job_id, binding);
    auto placed = scheduler_->schedule(task);
    if (placed) {
      run_job(task, *placed);
    } else {
      handle_stall();
    }
  } catch (const std::exception& ex) {
    scheduler_->cancel(job_id);
    {
      std::lock_guard lock(mutex_);
      fail_task_tree_locked(step, ex.what());
      update_model_counters_locked();
      done_cv_.notify_all();
    }
    handle_stall();
  }
}

TaskDescription Engine::make_task_description(const std::string& step,
                                              const std::string& job_id,
                                              const Binding& binding) {
  std::lock_guard lock(mutex_);
  const StepSpec& spec = graph_.step(step);
  TaskDescription task;
  task.step = step;
  task.job_id = job_id;
  task.requirements = spec.requirements;
  task.target = binding.target;
  task.replicas = binding.effective_replicas();
  task.recycle = binding.recycle;
  for (const auto& in : spec.inputs) {
    const DataToken& tok = tokens_.get(input_token_id(spec, in));
    if (tok.is_list()) {
      for (const auto& child : *tok.children) {
        if (tokens_.get(child).kind != DataKind::value) task.data_deps.push_back(child);
      }
    } else if (tok.kind != DataKind::value) {
      task.data_deps.push_back(tok.id);
    }
  }
  return task;
}

std::string Engine::input_token_id(const StepSpec& spec, const InputSpec& input) const {
  std::string id = input.source.kind == InputRef::Kind::workflow_input
                       ? "input:" + input.source.input_name
                       : input.source.step + "#" + input.source.output;
  if (spec.scattered_input && *spec.scattered_input == input.name &&
      spec.scatter_index) {
    id += "[" + std::to_string(*spec.scatter_index) + "]";
  }
  return id;
}

std::string Engine::workdir_view(const Resource& resource,
                                 const std::string& job_id) const {
  return resource.root + "/" + job_id;
}

// ---------------------------------------------------------------------------
// Job execution
// ---------------------------------------------------------------------------

void Engine::run_job(const TaskDescription& task,
                     const std::vector<Resource>& resources) {
  MappingDirectives directives;
  StepSpec spec;
  JobRuntime* job = nullptr;
  {
    std::lock_guard lock(mutex_);
    spec = graph_.step(task.step);
    auto& jr = jobs_[task.job_id];
    jr.id = task.job_id;
    jr.step = task.step;
    jr.binding = bindings_.lookup(task.step);
    jr.resources = resources;
    jr.ranks = task.replicas;
    directives = apply_mapping_pattern(jr.binding);
    job = &jr;
  }

  bool ok = false;
  std::string error;
  try {
    stage_inputs(*job, spec);
    launch_job(*job, spec, directives);
    if (job->exit_code == 0) {
      register_outputs(*job, spec);
      ok = true;
    } else {
      error = job->error.empty()
                  ? fmt::format("command exited with code {}", job->exit_code)
                  : job->error;
    }
  } catch (const std::exception& ex) {
    error = ex.what();
    if (job->exit_code == 0) job->exit_code = -1;
  }
  {
    std::lock_guard lock(mutex_);
    job->error = error;
  }
  events_.emit(ev::job_finished, {{"job", task.job_id},
                                  {"step", task.step},
                                  {"status", ok ? "completed" : "failed"},
                                  {"exit_code", job->exit_code}});
  scheduler_->notify_completion(task.job_id,
                                ok ? JobStatus::completed : JobStatus::failed);
  on_task_finished(task.step, ok, error);
  handle_stall();
}

void Engine::stage_inputs(JobRuntime& job, const StepSpec& spec) {
  for (const auto& r : job.resources) {
    deployments_->connector(r.model).make_dirs(r, workdir_view(r, job.id));
  }
  for (const auto& r : job.resources) {
    std::string wd = workdir_view(r, job.id);
    auto& values = job.input_values[r.id];
    for (const auto& in : spec.inputs) {
      const DataToken& tok = tokens_.get(input_token_id(spec, in));
      std::vector<std::string> elements =
          tok.is_list() ? *tok.children : std::vector<std::string>{tok.id};
      std::vector<std::string> parts;
      for (size_t i = 0; i < elements.size(); ++i) {
        const DataToken& element = tokens_.get(elements[i]);
        if (element.kind == DataKind::value) {
          parts.push_back(element.value.value_or(""));
        } else {
          std::string view = resolve_input_path(
              element.id, r, wd, in.name, tok.is_list() ? static_cast<int>(i) : -1);
          parts.push_back(deployments_->connector(r.model).command_path(r, view));
        }
      }
      values[in.name] = util::join(parts, " ");
    }
  }
  events_.emit(ev::job_staged, {{"job", job.id}, {"step", job.step}});
}

std::string Engine::resolve_input_path(const std::string& token,
                                       const Resource& resource,
                                       const std::string& workdir,
                                       const std::string& input_name, int element) {
  // In-place reuse first: a replica on this resource or under a shared
  // mount of its model means no transfer at all (R4).
  if (auto in_place = data_->readable_path(token, resource)) {
    events_.emit(ev::transfer_skipped, {{"token", token},
                                        {"destination", resource.id},
                                        {"path", *in_place},
                                        {"reason", "readable in place"}});
    return *in_place;
  }
  std::string dest = workdir + "/.inputs/" + input_name;
  if (element >= 0) dest += "." + std::to_string(element);
  TransferPlan plan = data_->plan_transfer(token, resource, dest);
  data_->execute_transfer(plan);
  return dest;
}

std::string Engine::substitute_command(const StepSpec& spec,
                                       const std::map<std::string, std::string>& values) {
  std::string command = spec.command;
  for (const auto& [name, value] : values) {
    std::string placeholder = "{" + name + "}";
    size_t pos = 0;
    while ((pos = command.find(placeholder, pos)) != std::string::npos) {
      command.replace(pos, placeholder.size(), value);
      pos += value.size();
    }
  }
  return command;
}

void Engine::launch_job(JobRuntime& job, const StepSpec& spec,
                        const MappingDirectives& directives) {
  std::vector<std::string> hostnames;
  for (const auto& r : job.resources) hostnames.push_back(r.hostname);
  std::string hosts = util::join(hostnames, ",");

  json started;
  started["job"] = job.id;
  started["step"] = job.step;
  started["ranks"] = directives.ranks;
  started["resources"] = json::array();
  for (const auto& r : job.resources) started["resources"].push_back(r.id);
  events_.emit(ev::job_started, started);

  int ranks = directives.ranks;
  std::vector<CommandResult> results(static_cast<size_t>(ranks));
  std::vector<std::string> failures(static_cast<size_t>(ranks));

  auto run_rank = [&](int rank) {
    const Resource& r = job.resources[static_cast<size_t>(rank)];
    std::string wd = workdir_view(r, job.id);
    std::map<std::string, std::string> env;
    if (directives.rank_env) {
      env[kRankVariable] = std::to_string(rank);
      env[kHostsVariable] = hosts;
    }
    std::string command = substitute_command(spec, job.input_values[r.id]);
    try {
      results[static_cast<size_t>(rank)] =
          deployments_->connector(r.model).run(r, command, env, wd, spec.timeout_sec);
    } catch (const std::exception& ex) {
      failures[static_cast<size_t>(rank)] = ex.what();
    }
  };

  if (ranks == 1) {
    run_rank(0);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(static_cast<size_t>(ranks));
    for (int k = 0; k < ranks; ++k) threads.emplace_back(run_rank, k);
    for (auto& t : threads) t.join();
  }

  for (int k = 0; k < ranks; ++k) {
    if (!failures[static_cast<size_t>(k)].empty()) {
      throw EngineError("rank " + std::to_string(k) + " failed to spawn: " +
                        failures[static_cast<size_t>(k)]);
    }
  }
  job.exit_code = 0;
  for (int k = 0; k < ranks; ++k) {
    const auto& res = results[static_cast<size_t>(k)];
    if (res.timed_out && job.error.empty()) {
      job.error = fmt::format("rank {} timed out", k);
    }
    if (res.exit_code != 0 && job.exit_code == 0) job.exit_code = res.exit_code;
  }
  job.stdout0 = results[0].output;
}

void Engine::register_outputs(JobRuntime& job, const StepSpec& spec) {
  for (const auto& out : spec.outputs) {
    std::string id = job.step + "#" + out.name;
    if (out.from_stdout) {
      std::string value = job.stdout0;
      if (!value.empty() && value.back() == '\n') value.pop_back();
      tokens_.put(DataToken{id, DataKind::value, id, value, std::nullopt});
      continue;
    }
    std::vector<std::pair<std::string, Resource>> matches;  // (view path, resource)
    for (const auto& r : job.resources) {
      std::string wd = workdir_view(r, job.id);
      for (const auto& m : deployments_->connector(r.model).glob(r, wd, out.glob)) {
        matches.emplace_back(m, r);
      }
    }
    std::sort(matches.begin(), matches.end(),
              [](const auto& a, const auto& b) {
                return a.first != b.first ? a.first < b.first : a.second.id < b.second.id;
              });
    if (out.list) {
      std::vector<std::string> children;
      for (size_t i = 0; i < matches.size(); ++i) {
        std::string child = id + "[" + std::to_string(i) + "]";
        bool is_dir = deployments_->connector(matches[i].second.model)
                          .probe(matches[i].second, matches[i].first)
                          .is_directory;
        tokens_.put(DataToken{child,
                              is_dir ? DataKind::directory : DataKind::file,
                              child, std::nullopt, std::nullopt});
        data_->add_remote_path_mapping(child, matches[i].second, matches[i].first);
        children.push_back(child);
      }
      tokens_.put(DataToken{id, DataKind::file, id, std::nullopt, children});
      continue;
    }
    if (matches.empty()) {
      throw EngineError("output '" + out.name + "' of " + job.step +
                        ": glob '" + out.glob + "' matched nothing");
    }
    if (matches.size() > 1) {
      throw EngineError("output '" + out.name + "' of " + job.step + ": glob '" +
                        out.glob + "' matched " + std::to_string(matches.size()) +
                        " paths; declare 'list: true' for fan-out outputs");
    }
    bool is_dir = deployments_->connector(matches[0].second.model)
                      .probe(matches[0].second, matches[0].first)
                      .is_directory;
    tokens_.put(DataToken{id, is_dir ? DataKind::directory : DataKind::file, id,
                          std::nullopt, std::nullopt});
    data_->add_remote_path_mapping(id, matches[0].second, matches[0].first);
  }
}

void Engine::on_task_finished(const std::string& step, bool ok,
                              const std::string& error) {
  std::vector<std::pair<std::string, std::string>> to_spawn;
  {
    std::lock_guard lock(mutex_);
    auto& t = tasks_.at(step);
    if (ok) {
      t.state = TaskRuntime::State::completed;
    } else {
      fail_task_tree_locked(step, error);
    }
    update_model_counters_locked();
    if (!options_.serial) to_spawn = collect_fireable_locked();
    done_cv_.notify_all();
  }
  for (const auto& [s, j] : to_spawn) {
    spawn([this, s = s, j = j] { prep_task(s, j); });
  }
}

void Engine::fail_task_tree_locked(const std::string& step, const std::string& reason) {
  std::deque<std::string> queue{step};
  bool root = true;
  while (!queue.empty()) {
    std::string id = queue.front();
    queue.pop_front();
    auto it = tasks_.find(id);
    if (it != tasks_.end() && it->second.state != TaskRuntime::State::completed &&
        it->second.state != TaskRuntime::State::failed) {
      it->second.state = TaskRuntime::State::failed;
      it->second.error = root ? reason : "upstream failure: " + step;
      events_.emit(ev::task_failed, {{"step", id}, {"reason", it->second.error}});
    } else if (!root) {
      continue;  // already terminal: its subtree was handled
    }
    for (const auto& dep : tgraph_.dependents(id)) {
      if (tgraph_.nodes().at(dep).kind == NodeKind::task) queue.push_back(dep);
    }
    root = false;
  }
}

void Engine::update_model_counters_locked() {
  std::map<std::string, int> remaining;
  std::set<std::string> bound_models;
  for (const auto& [id, t] : tasks_) {
    const std::string& model = bindings_.lookup(id).target.model;
    bound_models.insert(model);
    if (t.state == TaskRuntime::State::waiting ||
        t.state == TaskRuntime::State::submitted) {
      remaining[model]++;
    }
  }
  model_remaining_.clear();
  for (const auto& model : bound_models) model_remaining_[model] = remaining[model];
  for (const auto& model : bound_models) {
    if (remaining[model] == 0 && model_finish_emitted_.insert(model).second) {
      events_.emit(ev::model_last_task_finished, {{"model", model}});
    }
  }
}

void Engine::handle_stall() {
  if (!scheduler_) return;
  auto drained = scheduler_->drain_if_stalled();
  if (drained.empty()) return;
  std::lock_guard lock(mutex_);
  for (const auto& task : drained) {
    spdlog::warn("scheduling stall: step {} can never be placed on {}/{}", task.step,
                 task.target.model, task.target.service);
    fail_task_tree_locked(task.step,
                          "scheduling stall: no resource of service '" +
                              task.target.service + "' can satisfy the request");
  }
  update_model_counters_locked();
  done_cv_.notify_all();
}

// ---------------------------------------------------------------------------
// Wrap-up
// ---------------------------------------------------------------------------

void Engine::collect_terminal_outputs() {
  std::vector<std::pair<std::string, std::string>> terminals;
  {
    std::lock_guard lock(mutex_);
    for (const auto& [step, output] : graph_.terminal_outputs()) {
      if (tasks_.at(step).state == TaskRuntime::State::completed) {
        terminals.emplace_back(step, output);
      }
    }
  }
  fs::path dir = options_.outdir / "outputs";
  for (const auto& [step, output] : terminals) {
    std::string token = step + "#" + output;
    try {
      fs::path path = data_->collect_output(token, dir);
      std::lock_guard lock(mutex_);
      outputs_.push_back(OutputRecord{token, step + ":" + output, path.string()});
    } catch (const std::exception& ex) {
      spdlog::warn("could not collect output {}: {}", token, ex.what());
    }
  }
}

RunReport Engine::assemble_report() {
  RunReport report;
  report.run_id = make_run_id();
  report.workflow = workflow_name_;
  report.events = events_.snapshot();
  report.copies = copies_from_events(report.events);

  std::map<std::string, JobRecord> by_job;
  {
    std::lock_guard lock(mutex_);
    for (const auto& [step, t] : tasks_) {
      JobRecord rec;
      rec.step = step;
      rec.status = t.state == TaskRuntime::State::completed ? "completed" : "failed";
      rec.error = t.error;
      const Binding& b = bindings_.lookup(step);
      rec.model = b.target.model;
      rec.service = b.target.service;
      auto jit = jobs_.find(t.job_id);
      if (!t.job_id.empty() && jit != jobs_.end()) {
        const JobRuntime& jr = jit->second;
        rec.id = jr.id;
        rec.ranks = jr.ranks;
        rec.exit_code = jr.exit_code;
        for (const auto& r : jr.resources) rec.resources.push_back(r.id);
        by_job.emplace(jr.id, std::move(rec));
      } else {
        by_job.emplace("~" + step, std::move(rec));  // sorts after real jobs
      }
    }
  }
  for (const auto& e : report.events) {
    if (!e.fields.contains("job")) continue;
    auto it = by_job.find(e.fields.value("job", ""));
    if (it == by_job.end()) continue;
    if (e.kind == ev::job_queued) it->second.queued = e.t;
    if (e.kind == ev::job_scheduled) it->second.scheduled = e.t;
    if (e.kind == ev::job_staged) it->second.staged = e.t;
    if (e.kind == ev::job_started) it->second.started = e.t;
    if (e.kind == ev::job_finished) it->second.finished = e.t;
  }
  bool any_failed = false;
  for (auto& [_, rec] : by_job) {
    if (rec.status != "completed") any_failed = true;
    report.jobs.push_back(std::move(rec));
  }

  for (const auto& name : deployments_->model_names()) {
    ModelRecord m;
    m.name = name;
    m.external = deployments_->is_external(name);
    m.deploy_count = deployments_->deploy_count(name);
    m.redeploy_count = deployments_->redeploy_count(name);
    for (const auto& r : deployments_->resources(name)) m.resources.push_back(r.id);
    for (const auto& e : report.events) {
      if (e.fields.value("model", "") != name) continue;
      if (e.kind == ev::model_deployed || e.kind == ev::model_attached) {
        m.deployed_at = e.t;
      }
      if (e.kind == ev::model_undeployed) m.undeployed_at = e.t;
    }
    report.models.push_back(std::move(m));
  }

  report.outputs = outputs_;
  report.teardown_failures = teardown_failures_;
  report.status = any_failed ? "failed" : "completed";
  return report;
}

void Engine::spawn(std::function<void()> fn) {
  std::lock_guard lock(workers_mutex_);
  workers_.emplace_back([fn = std::move(fn)] {
    try {
      fn();
    } catch (const std::exception& ex) {
      // Task-level failures are handled inside the worker; anything
      // escaping to here is an engine bug worth surfacing loudly.
      spdlog::critical("worker thread error: {}", ex.what());
    }
  });
}

void Engine::join_workers() {
  size_t joined = 0;
  while (true) {
    std::thread worker;
    {
      std::lock_guard lock(workers_mutex_);
      if (joined >= workers_.size()) break;
      worker = std::move(workers_[joined]);
      ++joined;
    }
    if (worker.joinable()) worker.join();
  }
}

}  // namespace streamflow
