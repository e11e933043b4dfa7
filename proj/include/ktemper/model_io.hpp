#pragma once

#include "ktemper/edmd.hpp"
#include "ktemper/model.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>

namespace ktemper::io {

// Model files are JSON objects:
//
//   {
//     "n_psi": 2, "horizon": 3,
//     "actions": ["left", "right"],
//     "A": [[a00, a01, a10, a11], [...]],   // one row-major matrix per action
//     "c": [c0, c1],
//     "psi1": [p0, p1],
//     "action_mask": [[0, 1], [1], [0]]     // optional, indices per step
//   }

/// Throws ParseError (with line and column for syntax errors).
KoopmanModel parse_model(std::string_view text);

/// Throws ParseError when the file cannot be read or parsed.
KoopmanModel read_model(const std::filesystem::path& path);

/// Serializes with round-trip exact numbers.
std::string model_to_json(const KoopmanModel& model);
void write_model(const std::filesystem::path& path, const KoopmanModel& model);

// Trajectory datasets are comma-separated text, one transition per row:
//
//   # prelifted            (optional directive: states are already lifted)
//   # actions 3            (optional directive: declared action count)
//   action,x0,x1,y0,y1     (header; x = current state, y = next state)
//   0,0.1,0.2,0.15,0.2
//
// Each row becomes a single-transition trajectory.

edmd::TrajectoryDataset parse_dataset(std::istream& in);
edmd::TrajectoryDataset read_dataset(const std::filesystem::path& path);
void write_dataset(std::ostream& out, const edmd::TrajectoryDataset& data);

// Observable basis files: {"lambda": 8.0, "affine": true, "centers": [[..], ..]}
edmd::ObservableBasis read_basis(const std::filesystem::path& path);

/// Shortest text that parses back to exactly the same double (%.17g).
std::string format_double(double value);

}  // namespace ktemper::io
