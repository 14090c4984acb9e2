#include "streamflow/events.hpp"

namespace streamflow {

json Event::to_json() const {
  json j = fields;
  j["seq"] = seq;
  j["t"] = t;
  j["kind"] = kind;
  return j;
}

Event Event::from_json(const json& j) {
  Event e;
  e.seq = j.at("seq").get<uint64_t>();
  e.t = j.at("t").get<double>();
  e.kind = j.at("kind").get<std::string>();
  e.fields = j;
  e.fields.erase("seq");
  e.fields.erase("t");
  e.fields.erase("kind");
  return e;
}

uint64_t EventLog::emit(std::string kind, json fields) {
  std::lock_guard lock(mutex_);
  Event e;
  e.seq = next_seq_++;
  e.t = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
            .count();
  e.kind = std::move(kind);
  e.fields = std::move(fields);
  events_.push_back(std::move(e));
  return events_.back().seq;
}

std::vector<Event> EventLog::snapshot() const {
  std::lock_guard lock(mutex_);
  return events_;
}

double EventLog::now() const {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
      .count();
}

}  // namespace streamflow
