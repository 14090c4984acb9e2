#include "streamflow/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <fmt/format.h>

#include "streamflow/errors.hpp"
#include "streamflow/util.hpp"

namespace streamflow {

double RunReport::makespan() const {
  std::optional<double> first, last;
  for (const auto& job : jobs) {
    if (job.queued && (!first || *job.queued < *first)) first = job.queued;
    if (job.finished && (!last || *job.finished > *last)) last = job.finished;
  }
  if (!first || !last) return 0.0;
  return *last - *first;
}

namespace {

json opt_to_json(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

std::optional<double> opt_from_json(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

json RunReport::to_json() const {
  json j;
  j["run_id"] = run_id;
  j["workflow"] = workflow;
  j["status"] = status;
  j["events"] = json::array();
  for (const auto& e : events) j["events"].push_back(e.to_json());
  j["jobs"] = json::array();
  for (const auto& job : jobs) {
    json jj;
    jj["id"] = job.id;
    jj["step"] = job.step;
    jj["model"] = job.model;
    jj["service"] = job.service;
    jj["status"] = job.status;
    jj["error"] = job.error;
    jj["resources"] = job.resources;
    jj["ranks"] = job.ranks;
    jj["exit_code"] = job.exit_code;
    jj["queued"] = opt_to_json(job.queued);
    jj["scheduled"] = opt_to_json(job.scheduled);
    jj["staged"] = opt_to_json(job.staged);
    jj["started"] = opt_to_json(job.started);
    jj["finished"] = opt_to_json(job.finished);
    j["jobs"].push_back(std::move(jj));
  }
  j["copies"] = json::array();
  for (const auto& c : copies) {
    j["copies"].push_back({{"token", c.token},
                           {"kind", c.kind},
                           {"src", c.src},
                           {"src_path", c.src_path},
                           {"dst", c.dst},
                           {"dst_path", c.dst_path},
                           {"bytes", c.bytes},
                           {"duration", c.duration}});
  }
  j["models"] = json::array();
  for (const auto& m : models) {
    j["models"].push_back({{"name", m.name},
                           {"external", m.external},
                           {"deploy_count", m.deploy_count},
                           {"redeploy_count", m.redeploy_count},
                           {"deployed_at", opt_to_json(m.deployed_at)},
                           {"undeployed_at", opt_to_json(m.undeployed_at)},
                           {"resources", m.resources}});
  }
  j["outputs"] = json::array();
  for (const auto& o : outputs) {
    j["outputs"].push_back({{"token", o.token}, {"name", o.name}, {"path", o.path}});
  }
  j["teardown_failures"] = teardown_failures;
  return j;
}

RunReport RunReport::from_json(const json& j) {
  RunReport r;
  r.run_id = j.at("run_id").get<std::string>();
  r.workflow = j.at("workflow").get<std::string>();
  r.status = j.at("status").get<std::string>();
  for (const auto& e : j.at("events")) r.events.push_back(Event::from_json(e));
  for (const auto& jj : j.at("jobs")) {
    JobRecord job;
    job.id = jj.at("id").get<std::string>();
    job.step = jj.at("step").get<std::string>();
    job.model = jj.at("model").get<std::string>();
    job.service = jj.at("service").get<std::string>();
    job.status = jj.at("status").get<std::string>();
    job.error = jj.at("error").get<std::string>();
    job.resources = jj.at("resources").get<std::vector<std::string>>();
    job.ranks = jj.at("ranks").get<int>();
    job.exit_code = jj.at("exit_code").get<int>();
    job.queued = opt_from_json(jj, "queued");
    job.scheduled = opt_from_json(jj, "scheduled");
    job.staged = opt_from_json(jj, "staged");
    job.started = opt_from_json(jj, "started");
    job.finished = opt_from_json(jj, "finished");
    r.jobs.push_back(std::move(job));
  }
  for (const auto& jj : j.at("copies")) {
    CopyRecord c;
    c.token = jj.at("token").get<std::string>();
    c.kind = jj.at("kind").get<std::string>();
    c.src = jj.at("src").get<std::string>();
    c.src_path = jj.at("src_path").get<std::string>();
    c.dst = jj.at("dst").get<std::string>();
    c.dst_path = jj.at("dst_path").get<std::string>();
    c.bytes = jj.at("bytes").get<uint64_t>();
    c.duration = jj.at("duration").get<double>();
    r.copies.push_back(std::move(c));
  }
  for (const auto& jj : j.at("models")) {
    ModelRecord m;
    m.name = jj.at("name").get<std::string>();
    m.external = jj.at("external").get<bool>();
    m.deploy_count = jj.at("deploy_count").get<int>();
    m.redeploy_count = jj.at("redeploy_count").get<int>();
    m.deployed_at = opt_from_json(jj, "deployed_at");
    m.undeployed_at = opt_from_json(jj, "undeployed_at");
    m.resources = jj.at("resources").get<std::vector<std::string>>();
    r.models.push_back(std::move(m));
  }
  for (const auto& jj : j.at("outputs")) {
    r.outputs.push_back(OutputRecord{jj.at("token").get<std::string>(),
                                     jj.at("name").get<std::string>(),
                                     jj.at("path").get<std::string>()});
  }
  r.teardown_failures = j.at("teardown_failures").get<std::vector<std::string>>();
  return r;
}

std::vector<CopyRecord> copies_from_events(const std::vector<Event>& events) {
  std::vector<CopyRecord> out;
  for (const auto& e : events) {
    if (e.kind != ev::copy) continue;
    CopyRecord c;
    c.token = e.fields.value("token", "");
    c.kind = e.fields.value("kind", "");
    c.src = e.fields.value("src", "");
    c.src_path = e.fields.value("src_path", "");
    c.dst = e.fields.value("dst", "");
    c.dst_path = e.fields.value("dst_path", "");
    c.bytes = e.fields.value("bytes", uint64_t{0});
    c.duration = e.fields.value("duration", 0.0);
    out.push_back(std::move(c));
  }
  return out;
}

RunReport load_report(const std::filesystem::path& file) {
  json j;
  try {
    j = json::parse(util::read_file(file));
    return RunReport::from_json(j);
  } catch (const json::exception& e) {
    throw ValidationError(file.string(), std::string("malformed report: ") + e.what());
  }
}

void save_report(const RunReport& report, const std::filesystem::path& file) {
  util::write_file(file, report.to_json().dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

namespace {

struct Span {
  double begin = 0.0;
  double end = 0.0;
  char fill = '#';
};

double report_end(const RunReport& report) {
  double end = 0.0;
  for (const auto& job : report.jobs) {
    if (job.finished) end = std::max(end, *job.finished);
  }
  for (const auto& e : report.events) end = std::max(end, e.t);
  return end;
}

}  // namespace

std::string render_text_gantt(const RunReport& report, int width) {
  if (width < 10) width = 10;
  double end = report_end(report);
  std::string out;
  out += fmt::format("run {} workflow {} status {}\n", report.run_id, report.workflow,
                     report.status);
  if (report.jobs.empty() || end <= 0.0) {
    out += "(empty timeline)\n";
    out += fmt::format("makespan: {:.3f}s\n", report.makespan());
    return out;
  }

  // One lane per resource; bars: '-' scheduled->started (engine phases),
  // '#' started->finished (command execution). White space is engine
  // overhead between bars.
  std::map<std::string, std::vector<Span>> lanes;
  for (const auto& job : report.jobs) {
    if (!job.started || !job.finished || !job.scheduled) continue;
    for (const auto& res : job.resources) {
      lanes[res].push_back(Span{*job.scheduled, *job.started, '-'});
      lanes[res].push_back(Span{*job.started, *job.finished, '#'});
    }
  }
  for (const auto& e : report.events) {
    if (e.kind != ev::copy) continue;
    double duration = e.fields.value("duration", 0.0);
    lanes["[transfers]"].push_back(Span{e.t - duration, e.t, 'c'});
  }

  size_t label_width = 0;
  for (const auto& [name, _] : lanes) label_width = std::max(label_width, name.size());

  auto column = [&](double t) {
    double frac = std::clamp(t / end, 0.0, 1.0);
    return static_cast<int>(std::floor(frac * (width - 1)));
  };

  out += fmt::format("{:<{}} |{:<{}}|\n", "", label_width,
                     fmt::format("0s .. {:.3f}s", end), width);
  for (const auto& [name, spans] : lanes) {
    std::string lane(static_cast<size_t>(width), ' ');
    for (const auto& span : spans) {
      int a = column(span.begin);
      int b = std::max(a, column(span.end));
      for (int i = a; i <= b; ++i) lane[static_cast<size_t>(i)] = span.fill;
    }
    out += fmt::format("{:<{}} |{}|\n", name, label_width, lane);
  }
  out += fmt::format("makespan: {:.3f}s\n", report.makespan());
  return out;
}

std::string render_svg(const RunReport& report) {
  constexpr int chart_width = 1000;
  constexpr int lane_height = 22;
  constexpr int left = 220;
  double end = std::max(report_end(report), 1e-9);

  std::set<std::string> lane_names;
  for (const auto& job : report.jobs) {
    for (const auto& res : job.resources) lane_names.insert(res);
  }
  std::map<std::string, int> lane_index;
  for (const auto& name : lane_names) {
    int idx = static_cast<int>(lane_index.size());
    lane_index[name] = idx;
  }
  int height = lane_height * static_cast<int>(lane_index.size() + 2);

  auto x_of = [&](double t) {
    return left + (std::clamp(t, 0.0, end) / end) * (chart_width - left - 10);
  };

  std::string out;
  out += fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" "
      "font-family=\"monospace\" font-size=\"11\">\n",
      chart_width, height);
  out += fmt::format("<text x=\"4\" y=\"14\">workflow {} status {} makespan {:.3f}s</text>\n",
                     report.workflow, report.status, report.makespan());
  for (const auto& [name, idx] : lane_index) {
    int y = lane_height * (idx + 1);
    out += fmt::format("<text x=\"4\" y=\"{}\">{}</text>\n", y + 14, name);
    out += fmt::format(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#ddd\"/>\n", left,
        y + lane_height - 2, chart_width - 10, y + lane_height - 2);
  }
  for (const auto& job : report.jobs) {
    if (!job.scheduled || !job.started || !job.finished) continue;
    for (const auto& res : job.resources) {
      int y = lane_height * (lane_index[res] + 1) + 3;
      out += fmt::format(
          "<rect x=\"{:.2f}\" y=\"{}\" width=\"{:.2f}\" height=\"{}\" fill=\"#f0c674\">"
          "<title>{} staging</title></rect>\n",
          x_of(*job.scheduled), y, std::max(x_of(*job.started) - x_of(*job.scheduled), 0.5),
          lane_height - 8, job.id);
      out += fmt::format(
          "<rect x=\"{:.2f}\" y=\"{}\" width=\"{:.2f}\" height=\"{}\" fill=\"#81a2be\">"
          "<title>{} {}</title></rect>\n",
          x_of(*job.started), y, std::max(x_of(*job.finished) - x_of(*job.started), 0.5),
          lane_height - 8, job.id, job.step);
    }
  }
  out += "</svg>\n";
  return out;
}

std::string render_summary(const RunReport& report) {
  std::string out;
  out += fmt::format("workflow:  {}\n", report.workflow);
  out += fmt::format("status:    {}\n", report.status);
  out += fmt::format("makespan:  {:.3f}s\n", report.makespan());

  int completed = 0;
  int failed = 0;
  std::map<std::string, double> busy;
  std::map<std::string, int> model_jobs;
  for (const auto& job : report.jobs) {
    if (job.status == "completed") {
      ++completed;
    } else {
      ++failed;
    }
    if (job.started && job.finished && !job.model.empty()) {
      busy[job.model] += (*job.finished - *job.started) *
                         static_cast<double>(std::max<size_t>(job.resources.size(), 1));
      model_jobs[job.model]++;
    }
  }
  out += fmt::format("jobs:      {} completed, {} failed\n", completed, failed);
  for (const auto& [model, seconds] : busy) {
    out += fmt::format("model {}:  busy {:.3f}s over {} job(s)\n", model, seconds,
                       model_jobs[model]);
  }

  uint64_t bytes = 0;
  std::map<std::string, int> by_kind;
  for (const auto& c : report.copies) {
    bytes += c.bytes;
    by_kind[c.kind]++;
  }
  out += fmt::format("transfers: {} copies, {} bytes\n", report.copies.size(), bytes);
  for (const auto& [kind, count] : by_kind) {
    out += fmt::format("  {}: {}\n", kind, count);
  }
  out += fmt::format("outputs:   {}\n", report.outputs.size());
  if (!report.teardown_failures.empty()) {
    out += fmt::format("teardown failures: {}\n", report.teardown_failures.size());
  }
  return out;
}

std::string render_report(const RunReport& report, const std::string& format) {
  if (format == "summary") return render_summary(report);
  if (format == "text-gantt") return render_text_gantt(report);
  if (format == "svg") return render_svg(report);
  throw ValidationError("format", "unknown report format '" + format +
                                      "' (summary, text-gantt, svg)");
}

}  // namespace streamflow
