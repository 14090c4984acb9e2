#include <doctest.h>

#include "streamflow/errors.hpp"
#include "streamflow/report.hpp"
#include "test_support.hpp"

using namespace streamflow;
using sft::TempDir;

namespace {

JobRecord job(const std::string& id, const std::string& step, double queued,
              double started, double finished, const std::string& resource) {
  JobRecord j;
  j.id = id;
  j.step = step;
  j.model = "m";
  j.service = "s";
  j.status = "completed";
  j.resources = {resource};
  j.queued = queued;
  j.scheduled = queued + 0.1;
  j.staged = queued + 0.2;
  j.started = started;
  j.finished = finished;
  return j;
}

RunReport three_jobs() {
  RunReport r;
  r.run_id = "run-x";
  r.workflow = "wf";
  r.status = "completed";
  r.jobs.push_back(job("j1", "/a", 0.0, 1.0, 5.0, "r0"));
  r.jobs.push_back(job("j2", "/b", 0.5, 5.5, 9.0, "r0"));
  r.jobs.push_back(job("j3", "/c", 2.0, 6.0, 12.5, "r1"));
  return r;
}

}  // namespace

TEST_CASE("makespan: max(finish) - min(queued), hand-computed on a 3-job fixture") {
  auto r = three_jobs();
  CHECK(r.makespan() == doctest::Approx(12.5 - 0.0));
  RunReport empty;
  CHECK(empty.makespan() == 0.0);
}

TEST_CASE("rendering is a pure function of the report") {
  auto r = three_jobs();
  for (const std::string format : {"summary", "text-gantt", "svg"}) {
    auto a = render_report(r, format);
    auto b = render_report(r, format);
    CHECK(a == b);
    CHECK_FALSE(a.empty());
  }
  CHECK_THROWS_AS(render_report(r, "pdf"), ValidationError);
}

TEST_CASE("report JSON round-trips through save and load") {
  TempDir tmp;
  auto r = three_jobs();
  r.copies.push_back(CopyRecord{"tok", "remote_to_local", "r0", "/work/x",
                                "management", "/tmp/x", 42, 0.01});
  r.models.push_back(ModelRecord{"m", false, 1, 0, 0.1, 13.0, {"r0", "r1"}});
  r.outputs.push_back(OutputRecord{"tok", "/c:o", "/tmp/out"});
  save_report(r, tmp / "report.json");
  auto loaded = load_report(tmp / "report.json");
  CHECK(loaded.to_json() == r.to_json());
  // renderers agree on the reloaded report
  CHECK(render_summary(loaded) == render_summary(r));
  CHECK(render_text_gantt(loaded) == render_text_gantt(r));
  CHECK(render_svg(loaded) == render_svg(r));
}

TEST_CASE("text gantt: one lane per resource, bars inside the canvas") {
  auto r = three_jobs();
  auto text = render_text_gantt(r);
  CHECK(text.find("r0") != std::string::npos);
  CHECK(text.find("r1") != std::string::npos);
  CHECK(text.find('#') != std::string::npos);
  CHECK(text.find("makespan: 12.500s") != std::string::npos);

  RunReport single;
  single.run_id = "run-1";
  single.workflow = "wf";
  single.status = "completed";
  single.jobs.push_back(job("j1", "/a", 0.0, 0.5, 2.0, "only"));
  auto lines = render_text_gantt(single);
  // header + exactly one lane + footer
  CHECK(std::count(lines.begin(), lines.end(), '\n') == 4);
}

TEST_CASE("text gantt: empty report renders an empty chart") {
  RunReport empty;
  empty.run_id = "run-0";
  empty.workflow = "wf";
  empty.status = "completed";
  auto text = render_text_gantt(empty);
  CHECK(text.find("empty timeline") != std::string::npos);
  CHECK(text.find("makespan: 0.000s") != std::string::npos);
}

TEST_CASE("svg: one staging and one execution rect per (job, resource)") {
  auto r = three_jobs();
  auto svg = render_svg(r);
  size_t rects = 0;
  for (size_t pos = 0; (pos = svg.find("<rect", pos)) != std::string::npos; ++pos) rects++;
  CHECK(rects == 2 * 3);
  CHECK(svg.rfind("<svg", 0) == 0);
}

TEST_CASE("summary: per-model busy time and transfer byte totals") {
  auto r = three_jobs();
  r.copies.push_back(CopyRecord{"t", "remote_to_local", "r0", "/a", "management", "/b",
                                1000, 0.1});
  r.copies.push_back(CopyRecord{"t", "local_to_remote", "management", "/b", "r1", "/c",
                                1000, 0.1});
  auto summary = render_summary(r);
  // busy: (5-1) + (9-5.5) + (12.5-6) = 14.0 on model m
  CHECK(summary.find("busy 14.000s over 3 job(s)") != std::string::npos);
  CHECK(summary.find("2 copies, 2000 bytes") != std::string::npos);
  CHECK(summary.find("3 completed, 0 failed") != std::string::npos);
}

TEST_CASE("malformed report file") {
  TempDir tmp;
  sft::write(tmp / "bad.json", "{ not json ");
  CHECK_THROWS_WITH_AS(load_report(tmp / "bad.json"), doctest::Contains("malformed"),
                       ValidationError);
}
