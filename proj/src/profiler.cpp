#include "adaflow/profiler.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace adaflow {

const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::TASK_SUBMIT: return "TASK_SUBMIT";
    case EventKind::TASK_START: return "TASK_START";
    case EventKind::TASK_END: return "TASK_END";
    case EventKind::STAGE_START: return "STAGE_START";
    case EventKind::STAGE_END: return "STAGE_END";
    case EventKind::ADAPT_START: return "ADAPT_START";
    case EventKind::ADAPT_END: return "ADAPT_END";
    case EventKind::SYNC_START: return "SYNC_START";
    case EventKind::SYNC_ACK: return "SYNC_ACK";
  }
  return "?";
}

std::optional<EventKind> event_kind_from_string(const std::string& s) {
  static const std::map<std::string, EventKind> table = {
      {"TASK_SUBMIT", EventKind::TASK_SUBMIT},
      {"TASK_START", EventKind::TASK_START},
      {"TASK_END", EventKind::TASK_END},
      {"STAGE_START", EventKind::STAGE_START},
      {"STAGE_END", EventKind::STAGE_END},
      {"ADAPT_START", EventKind::ADAPT_START},
      {"ADAPT_END", EventKind::ADAPT_END},
      {"SYNC_START", EventKind::SYNC_START},
      {"SYNC_ACK", EventKind::SYNC_ACK},
  };
  auto it = table.find(s);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

void Profiler::record_at(const std::string& entity, EventKind kind, Nanos t) {
  std::lock_guard<std::mutex> lock(mu_);
  events_.push_back({entity, kind, t});
}

std::vector<ProfileEvent> Profiler::events() const {
  std::lock_guard<std::mutex> lock(mu_);
  return events_;
}

void Profiler::write_csv(const std::string& path) const {
  std::vector<ProfileEvent> snapshot = events();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw EngineError("cannot write profile: " + path);
  out << "entity_uid,event,timestamp_ns\n";
  for (const auto& e : snapshot)
    out << e.entity << ',' << to_string(e.kind) << ',' << e.t << '\n';
}

std::vector<ProfileEvent> read_profile_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw EngineError("cannot read profile: " + path);
  std::vector<ProfileEvent> events;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first) {
      first = false;
      if (line.rfind("entity_uid,", 0) == 0) continue;
    }
    if (line.empty()) continue;
    std::size_t c1 = line.find(',');
    std::size_t c2 = line.rfind(',');
    if (c1 == std::string::npos || c2 == c1)
      throw EngineError("malformed profile row: " + line);
    ProfileEvent e;
    e.entity = line.substr(0, c1);
    auto kind = event_kind_from_string(line.substr(c1 + 1, c2 - c1 - 1));
    if (!kind) throw EngineError("unknown event in profile row: " + line);
    e.kind = *kind;
    e.t = std::stoll(line.substr(c2 + 1));
    events.push_back(std::move(e));
  }
  return events;
}

double RunMetrics::total_task_execution_time_s() const {
  double total = 0.0;
  for (const auto& [pipeline, t] : task_execution_time_s) total += t;
  return total;
}

namespace {

std::string parent_of(const std::string& entity) {
  std::size_t pos = entity.rfind('/');
  return pos == std::string::npos ? std::string() : entity.substr(0, pos);
}

std::string root_of(const std::string& entity) {
  std::size_t pos = entity.find('/');
  return pos == std::string::npos ? entity : entity.substr(0, pos);
}

}  // namespace

RunMetrics compute_metrics(const std::vector<ProfileEvent>& events) {
  RunMetrics m;

  // Adaptation overhead: pair START/END (and SYNC_START/SYNC_ACK) per entity
  // in event order. Unmatched opens contribute nothing.
  std::map<std::string, Nanos> open_adapt, open_sync;
  Nanos overhead = 0;
  for (const auto& e : events) {
    switch (e.kind) {
      case EventKind::ADAPT_START: open_adapt[e.entity] = e.t; break;
      case EventKind::ADAPT_END: {
        auto it = open_adapt.find(e.entity);
        if (it != open_adapt.end()) {
          overhead += e.t - it->second;
          open_adapt.erase(it);
        }
        break;
      }
      case EventKind::SYNC_START: open_sync[e.entity] = e.t; break;
      case EventKind::SYNC_ACK: {
        auto it = open_sync.find(e.entity);
        if (it != open_sync.end()) {
          overhead += e.t - it->second;
          open_sync.erase(it);
        }
        break;
      }
      default: break;
    }
  }
  m.adaptation_overhead_s = ns_to_s(overhead);

  // Task execution time: per stage, span from earliest TASK_START to latest
  // TASK_END of its tasks; summed per pipeline.
  struct Span {
    Nanos first_start = 0, last_end = 0;
    bool has_start = false, has_end = false;
  };
  std::map<std::string, Span> stage_spans;  // key: pipeline/stage
  for (const auto& e : events) {
    if (e.kind != EventKind::TASK_START && e.kind != EventKind::TASK_END)
      continue;
    Span& span = stage_spans[parent_of(e.entity)];
    if (e.kind == EventKind::TASK_START) {
      if (!span.has_start || e.t < span.first_start) span.first_start = e.t;
      span.has_start = true;
    } else {
      if (!span.has_end || e.t > span.last_end) span.last_end = e.t;
      span.has_end = true;
    }
  }
  for (const auto& [stage_path, span] : stage_spans) {
    if (!span.has_start || !span.has_end) continue;
    m.task_execution_time_s[root_of(stage_path)] +=
        ns_to_s(span.last_end - span.first_start);
  }
  return m;
}

std::vector<ProfileFlag> check_trace(const std::vector<ProfileEvent>& events) {
  std::vector<ProfileFlag> flags;

  // Start/end pairing per entity. Retried tasks legitimately emit repeated
  // SUBMIT/START/END cycles, so repetitions are reported as duplicates, not
  // order violations, as long as each cycle is internally ordered.
  struct EntityState {
    int phase = 0;  // 0 idle, 1 submitted, 2 running
    int cycles = 0;
  };
  std::map<std::string, EntityState> tasks;
  std::map<std::string, int> stage_open;  // count of unmatched STAGE_STARTs

  auto flag = [&](const std::string& kind, const std::string& entity,
                  const std::string& detail) {
    flags.push_back({kind, entity, detail});
  };

  for (const auto& e : events) {
    switch (e.kind) {
      case EventKind::TASK_SUBMIT: {
        EntityState& st = tasks[e.entity];
        if (st.phase != 0)
          flag("order_violation", e.entity, "TASK_SUBMIT while not idle");
        st.phase = 1;
        if (++st.cycles > 1)
          flag("duplicate_event", e.entity, "repeated task cycle (retry)");
        break;
      }
      case EventKind::TASK_START: {
        EntityState& st = tasks[e.entity];
        if (st.phase != 1)
          flag("order_violation", e.entity, "TASK_START without TASK_SUBMIT");
        st.phase = 2;
        break;
      }
      case EventKind::TASK_END: {
        EntityState& st = tasks[e.entity];
        if (st.phase != 2)
          flag("order_violation", e.entity, "TASK_END without TASK_START");
        st.phase = 0;
        break;
      }
      case EventKind::STAGE_START:
        if (++stage_open[e.entity] > 1)
          flag("duplicate_event", e.entity, "nested STAGE_START");
        break;
      case EventKind::STAGE_END:
        if (--stage_open[e.entity] < 0) {
          flag("order_violation", e.entity, "STAGE_END without STAGE_START");
          stage_open[e.entity] = 0;
        }
        break;
      default: break;
    }
  }
  return flags;
}

}  // namespace adaflow
