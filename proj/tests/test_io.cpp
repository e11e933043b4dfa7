#include "fixtures.hpp"

#include "ktemper/error.hpp"
#include "ktemper/model_io.hpp"
#include "ktemper/random.hpp"
#include "ktemper/sampler.hpp"
#include "ktemper/trace_io.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

using namespace ktemper;
using namespace fixtures;

namespace {

void require_bitwise_equal(const KoopmanModel& a, const KoopmanModel& b) {
    REQUIRE(a.actions() == b.actions());
    REQUIRE(a.horizon() == b.horizon());
    CHECK(a.cost_row() == b.cost_row());
    CHECK(a.initial_state() == b.initial_state());
    for (std::size_t u = 0; u < a.action_count(); ++u) CHECK(a.dynamics(u) == b.dynamics(u));
    CHECK(a.mask() == b.mask());
}

ParseError parse_failure(const std::string& text) {
    try {
        io::parse_model(text);
    } catch (const ParseError& e) {
        return e;
    }
    FAIL("expected a parse error");
    return ParseError("");
}

std::string trace_text(std::uint64_t seed) {
    const auto m = seeded(3, 5, 3, 2);
    SamplerConfig cfg;
    cfg.ladder = make_log_ladder(0.5, 5.0, 3);
    cfg.sweeps = 20;
    cfg.seed = seed;
    std::ostringstream out;
    io::write_trace(out, solve(m, cfg), cfg.ladder);
    return out.str();
}

io::TraceCheck check(const std::string& text) {
    std::istringstream in(text);
    return io::check_trace(in);
}

}  // namespace

TEST_CASE("model JSON round trip is bit exact") {
    auto m = seeded(5, 7, 3, 99);
    require_bitwise_equal(m, io::parse_model(io::model_to_json(m)));

    const KoopmanModel masked(labels(3), m.dynamics(), m.cost_row(), m.initial_state(), 3,
                              KoopmanModel::ActionMask{{0, 2}, {1}, {0, 1, 2}});
    require_bitwise_equal(masked, io::parse_model(io::model_to_json(masked)));

    const auto dir = scratch_dir("io_model");
    io::write_model(dir / "m.json", masked);
    require_bitwise_equal(masked, io::read_model(dir / "m.json"));
}

TEST_CASE("model parse of a literal document") {
    const auto m = io::parse_model(R"({
        "n_psi": 2, "horizon": 3,
        "actions": ["left", "right"],
        "A": [[1, 2, 3, 4], [0.5, 0, 0, 0.5]],
        "c": [1, -1],
        "psi1": [0.25, 0.75]
    })");
    CHECK(m.lifted_dim() == 2);
    CHECK(m.horizon() == 3);
    CHECK(m.dynamics(0)(0, 1) == 2.0);
    CHECK(m.dynamics(0)(1, 0) == 3.0);
    CHECK(m.cost_row()[1] == -1.0);
    CHECK_FALSE(m.mask().has_value());
}

TEST_CASE("model parse errors") {
    SUBCASE("syntax error reports a position") {
        const auto e = parse_failure("{\n  \"n_psi\": 2,\n  \"horizon\": ,\n}");
        CHECK(e.line() == 3);
        CHECK(e.column() > 0);
    }
    SUBCASE("missing key") {
        const auto e = parse_failure(R"({"n_psi": 1, "horizon": 1, "actions": ["a"], "A": [[1]], "c": [1]})");
        CHECK(std::string(e.what()).find("psi1") != std::string::npos);
    }
    SUBCASE("wrong matrix size") {
        CHECK_THROWS_AS(
            io::parse_model(R"({"n_psi": 2, "horizon": 1, "actions": ["a"], "A": [[1, 0, 0]], "c": [1, 0], "psi1": [1, 0]})"),
            ParseError);
    }
    SUBCASE("non-numeric entry") {
        CHECK_THROWS_AS(
            io::parse_model(R"({"n_psi": 1, "horizon": 1, "actions": ["a"], "A": [["x"]], "c": [1], "psi1": [1]})"),
            ParseError);
    }
    SUBCASE("invariant violations are reported as parse errors") {
        CHECK_THROWS_AS(
            io::parse_model(R"({"n_psi": 1, "horizon": 0, "actions": ["a"], "A": [[1]], "c": [1], "psi1": [1]})"),
            ParseError);
        CHECK_THROWS_AS(io::parse_model(R"({"n_psi": 1, "horizon": 2, "actions": ["a"], "A": [[1]], "c": [1],
                                            "psi1": [1], "action_mask": [[0], [3]]})"),
                        ParseError);
    }
    SUBCASE("missing file names the path") {
        const auto path = scratch_dir("io_missing") / "absent.json";
        try {
            io::read_model(path);
            FAIL("expected a parse error");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find(path.string()) != std::string::npos);
        }
    }
}

TEST_CASE("dataset round trip") {
    edmd::TrajectoryDataset d;
    d.action_count = 3;
    RandomStream rng(4, 0);
    for (int k = 0; k < 12; ++k) {
        d.trajectories.push_back({{col({rng.normal(), rng.normal()}), col({rng.normal() * 1e-300, 1.0 / 3.0})},
                                  {static_cast<Action>(k % 3)}});
    }
    for (bool prelifted : {false, true}) {
        d.prelifted = prelifted;
        std::stringstream buf;
        io::write_dataset(buf, d);
        const auto back = io::parse_dataset(buf);
        CHECK(back.prelifted == prelifted);
        CHECK(back.action_count == 3);
        REQUIRE(back.trajectories.size() == d.trajectories.size());
        for (std::size_t k = 0; k < d.trajectories.size(); ++k) {
            CHECK(back.trajectories[k].states == d.trajectories[k].states);
            CHECK(back.trajectories[k].actions == d.trajectories[k].actions);
        }
    }
}

TEST_CASE("dataset parsing") {
    std::istringstream in("# prelifted\naction,x0,y0\n0,1,2\n1,2,4\n");
    const auto d = io::parse_dataset(in);
    CHECK(d.prelifted);
    CHECK(d.action_count == 2);
    CHECK(d.trajectories[1].states[1][0] == 4.0);

    std::istringstream declared("# actions 4\naction,x0,y0\n0,1,2\n");
    CHECK(io::parse_dataset(declared).action_count == 4);

    std::istringstream ragged("action,x0,y0\n0,1\n");
    CHECK_THROWS_AS(io::parse_dataset(ragged), ParseError);
    std::istringstream odd("action,x0,x1,y0\n0,1,2,3\n");
    CHECK_THROWS_AS(io::parse_dataset(odd), ParseError);
    std::istringstream text("action,x0,y0\n0,abc,2\n");
    CHECK_THROWS_AS(io::parse_dataset(text), ParseError);
    std::istringstream negative("action,x0,y0\n-1,1,2\n");
    CHECK_THROWS_AS(io::parse_dataset(negative), ParseError);
    CHECK_THROWS_AS(io::read_dataset(scratch_dir("io_ds") / "none.csv"), ParseError);
}

TEST_CASE("basis file") {
    const auto dir = scratch_dir("io_basis");
    {
        std::ofstream f(dir / "b.json");
        f << R"({"lambda": 8.0, "affine": true, "centers": [[0.0], [0.5], [1.0]]})";
    }
    const auto b = io::read_basis(dir / "b.json");
    CHECK(b.lambda == 8.0);
    CHECK(b.extra_affine);
    CHECK(b.size() == 4);
    CHECK(b.centers[1][0] == 0.5);
    {
        std::ofstream f(dir / "bad.json");
        f << R"({"lambda": 8.0, "centers": [[0.0], [0.5, 1.0]]})";
    }
    CHECK_THROWS(io::read_basis(dir / "bad.json"));
}

TEST_CASE("trace writing and checking") {
    const std::string text = trace_text(3);
    CHECK(text.rfind(std::string(io::kTraceHeader), 0) == 0);
    const auto ok = check(text);
    CHECK(ok.ok());
    CHECK(ok.rows == 20 * 3);
    CHECK(text == trace_text(3));

    SUBCASE("tampered best exceeds cost") {
        std::string bad = text;
        const auto line = bad.find('\n') + 1;
        const auto end = bad.find('\n', line);
        bad.replace(line, end - line, "1,0,0.5,1.0,2.0,0,0");
        CHECK_FALSE(check(bad).ok());
    }
    SUBCASE("bad header") {
        std::string bad = text;
        bad.replace(0, 5, "round");
        CHECK_FALSE(check(bad).ok());
    }
    SUBCASE("bad flag and field count") {
        CHECK_FALSE(check(std::string(io::kTraceHeader) + "\n1,0,0.5,1.0,0.5,2,0\n").ok());
        CHECK_FALSE(check(std::string(io::kTraceHeader) + "\n1,0,0.5,1.0\n").ok());
        CHECK_FALSE(check(std::string(io::kTraceHeader) + "\n1,0,0.5,x,0.5,0,0\n").ok());
    }
    SUBCASE("elapsed column accepted") {
        std::ostringstream out;
        io::write_baseline_trace(out, {3.0, 2.0}, {3.0, 2.0}, {0.1, 0.2});
        const auto c = check(out.str());
        CHECK(c.ok());
        CHECK(c.rows == 2);
    }
}

TEST_CASE("digest is FNV-1a 64") {
    CHECK(io::digest("") == "cbf29ce484222325");
    CHECK(io::digest("a") == "af63dc4c8601ec8c");
    CHECK(io::digest("foobar") == "85944171f73967e8");
}

TEST_CASE("format_double round trips") {
    RandomStream rng(12, 0);
    for (int k = 0; k < 10000; ++k) {
        const double v = rng.normal() * std::pow(10.0, static_cast<double>(rng.index(600)) - 300.0);
        CHECK(std::stod(io::format_double(v)) == v);
    }
    for (double v : {0.0, -0.0, 1.0 / 3.0, std::numeric_limits<double>::min(), std::numeric_limits<double>::max(),
                     std::numeric_limits<double>::denorm_min()}) {
        CHECK(std::strtod(io::format_double(v).c_str(), nullptr) == v);
    }
}
