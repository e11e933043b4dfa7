#include "ktemper/trace_io.hpp"

#include "ktemper/model_io.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace ktemper::io {

void write_trace(std::ostream& out, const SolveResult& result, const TemperatureLadder& ladder) {
    out << kTraceHeader << '\n';
    for (const auto& record : result.trace) {
        const std::size_t rungs = record.per_replica_cost.size();
        for (std::size_t j = 0; j < rungs; ++j) {
            const bool up = j + 1 < rungs && record.flips_this_sweep[j];
            const bool down = j > 0 && record.flips_this_sweep[j - 1];
            out << record.sweep_index << ',' << j << ',' << format_double(ladder[j]) << ','
                << format_double(record.per_replica_cost[j]) << ',' << format_double(record.per_replica_best[j]) << ','
                << (up ? 1 : 0) << ',' << (down ? 1 : 0) << '\n';
        }
    }
}

void write_baseline_trace(std::ostream& out, const std::vector<double>& cost, const std::vector<double>& best,
                          const std::vector<double>& elapsed) {
    out << kTraceHeader;
    if (!elapsed.empty()) out << ",elapsed_s";
    out << '\n';
    for (std::size_t k = 0; k < cost.size(); ++k) {
        out << k << ",0,0," << format_double(cost[k]) << ',' << format_double(best[k]) << ",0,0";
        if (!elapsed.empty()) out << ',' << format_double(elapsed[k]);
        out << '\n';
    }
}

TraceCheck check_trace(std::istream& in) {
    TraceCheck check;
    std::string line;
    if (!std::getline(in, line)) {
        check.errors.push_back("trace is empty");
        return check;
    }
    const bool timed = line == std::string(kTraceHeader) + ",elapsed_s";
    if (line != kTraceHeader && !timed) {
        check.errors.push_back("unexpected header: " + line);
        return check;
    }
    const std::size_t fields = timed ? 8 : 7;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> parts;
        std::stringstream ss(line);
        std::string part;
        while (std::getline(ss, part, ',')) parts.push_back(part);
        auto fail = [&](const std::string& why) {
            check.errors.push_back("line " + std::to_string(line_no) + ": " + why);
        };
        if (parts.size() != fields) {
            fail("expected " + std::to_string(fields) + " fields");
            continue;
        }
        std::vector<double> values;
        bool numeric = true;
        for (const auto& p : parts) {
            std::size_t used = 0;
            try {
                values.push_back(std::stod(p, &used));
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != p.size() || p.empty()) numeric = false;
        }
        if (!numeric) {
            fail("non-numeric field");
            continue;
        }
        for (std::size_t k : {std::size_t{0}, std::size_t{1}}) {
            if (values[k] < 0 || values[k] != std::floor(values[k])) fail("index fields must be non-negative integers");
        }
        for (std::size_t k : {std::size_t{5}, std::size_t{6}}) {
            if (values[k] != 0.0 && values[k] != 1.0) fail("flip flags must be 0 or 1");
        }
        if (!(values[4] <= values[3])) fail("best_cost exceeds cost");
        ++check.rows;
    }
    return check;
}

std::string digest(std::string_view bytes) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char ch : bytes) {
        hash ^= ch;
        hash *= 0x100000001b3ULL;
    }
    char buffer[17];
    std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(hash));
    return buffer;
}

}  // namespace ktemper::io
