#pragma once

#include <iosfwd>
#include <string>

#include "hybred/core/types.hpp"

namespace hybred {

// Tabulate an execution: one row per dense-output knot (event_flag 0), plus a
// pre-reset row (flag 1) and post-reset row (flag 2) for every event. Columns
// are t, domain_id, x_1 .. x_n (n = largest domain dimension appearing in the
// trace; shorter states leave trailing cells empty), event_flag. Doubles are
// printed with 17 significant digits, so equal traces serialize identically.
void write_trace_csv(const ExecutionTrace& trace, std::ostream& os);

std::string trace_csv(const ExecutionTrace& trace);

}  // namespace hybred
