#pragma once

#include <cstdint>
#include <functional>
#include <string>

namespace pfdam {

/// Process-wide worker count for cell-parallel assembly and parallel
/// parameter sweeps.  Results never depend on it; only wall time does.
void set_worker_count(int n);
int worker_count();

/// Run fn(begin, end) over chunks covering [0, n).  Callers write to
/// disjoint per-index slots and merge in index order afterwards, so results
/// do not depend on the partition.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn);

/// FNV-1a, used to stamp artifacts with a config fingerprint.
std::uint64_t fnv1a(const std::string& data);
std::string hex64(std::uint64_t value);

/// Shortest decimal form that round-trips to the same double.
std::string format_exact(double value);

inline const char* tool_version() { return "pfdam 0.1.0"; }

}  // namespace pfdam
