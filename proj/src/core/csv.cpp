#include "hybred/core/csv.hpp"

#include <cstdio>
#include <ostream>
#include <sstream>

namespace hybred {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void emit_row(std::ostream& os, double t, int domain_id, const Vec& x, Eigen::Index width,
              int flag) {
  os << fmt(t) << ',' << domain_id;
  for (Eigen::Index i = 0; i < width; ++i) {
    os << ',';
    if (i < x.size()) os << fmt(x[i]);
  }
  os << ',' << flag << '\n';
}

}  // namespace

void write_trace_csv(const ExecutionTrace& trace, std::ostream& os) {
  Eigen::Index width = std::max(trace.start.x.size(), trace.end.x.size());
  for (const auto& s : trace.segments)
    if (!s.empty()) width = std::max(width, s.start_state().size());
  for (const auto& e : trace.events) {
    width = std::max(width, e.pre.x.size());
    width = std::max(width, e.post.x.size());
  }

  os << "t,domain_id";
  for (Eigen::Index i = 0; i < width; ++i) os << ",x_" << (i + 1);
  os << ",event_flag\n";

  size_t ei = 0;
  auto flush_events_until = [&](double t) {
    while (ei < trace.events.size() && trace.events[ei].time <= t) {
      const auto& e = trace.events[ei];
      emit_row(os, e.time, e.pre.domain_id, e.pre.x, width, 1);
      emit_row(os, e.time, e.post.domain_id, e.post.x, width, 2);
      ++ei;
    }
  };

  for (const auto& seg : trace.segments) {
    if (seg.empty()) continue;
    flush_events_until(seg.t_start);
    emit_row(os, seg.steps.front().t0, seg.domain_id, seg.steps.front().x0, width, 0);
    for (const auto& st : seg.steps) emit_row(os, st.t1, seg.domain_id, st.x1, width, 0);
  }
  flush_events_until(trace.total_time);
  while (ei < trace.events.size()) {  // events after the last knot, if any
    const auto& e = trace.events[ei];
    emit_row(os, e.time, e.pre.domain_id, e.pre.x, width, 1);
    emit_row(os, e.time, e.post.domain_id, e.post.x, width, 2);
    ++ei;
  }
}

std::string trace_csv(const ExecutionTrace& trace) {
  std::ostringstream os;
  write_trace_csv(trace, os);
  return os.str();
}

}  // namespace hybred
