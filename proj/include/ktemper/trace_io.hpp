#pragma once

#include "ktemper/sampler.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace ktemper::io {

/// Header of every trace file. An optional trailing `elapsed_s` column is
/// accepted by check_trace.
inline constexpr std::string_view kTraceHeader = "sweep,beta_index,beta,cost,best_cost,flipped_up,flipped_down";

/// One row per recorded sweep per rung. flipped_up marks an exchange with
/// the next colder rung, flipped_down with the next hotter one.
void write_trace(std::ostream& out, const SolveResult& result, const TemperatureLadder& ladder);

/// Baseline traces in the same schema: one row per iteration/generation,
/// beta_index 0, beta 0, no flips. `elapsed` may be empty; otherwise it
/// adds the elapsed_s column.
void write_baseline_trace(std::ostream& out, const std::vector<double>& cost, const std::vector<double>& best,
                          const std::vector<double>& elapsed = {});

struct TraceCheck {
    std::size_t rows = 0;
    std::vector<std::string> errors;
    bool ok() const { return errors.empty(); }
};

/// Validates header, field count, numeric fields, 0/1 flags and
/// best_cost <= cost on every row.
TraceCheck check_trace(std::istream& in);

/// FNV-1a 64 of the bytes, as 16 hex digits.
std::string digest(std::string_view bytes);

}  // namespace ktemper::io
