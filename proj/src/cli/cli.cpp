#include "ktemper/cli.hpp"

#include "ktemper/baselines.hpp"
#include "ktemper/bench.hpp"
#include "ktemper/diagnostics.hpp"
#include "ktemper/edmd.hpp"
#include "ktemper/model_io.hpp"
#include "ktemper/sampler.hpp"
#include "ktemper/trace_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

namespace ktemper::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;
using io::format_double;

std::size_t default_threads() {
    const char* value = std::getenv(kThreadsEnv);
    if (value == nullptr || *value == '\0') return 1;
    std::size_t used = 0;
    unsigned long parsed = 0;
    try {
        parsed = std::stoul(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != std::string(value).size() || parsed == 0) {
        throw ConfigError(std::string(kThreadsEnv) + " must be a positive integer, got '" + value + "'");
    }
    return parsed;
}

std::string read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return {};
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
    if (!out) throw ConfigError("failed writing " + path.string());
}

fs::path manifest_path(const std::string& output) { return fs::path(output + ".manifest.json"); }

void write_manifest(const std::string& output, const json& manifest) {
    if (output.empty()) return;
    write_text(manifest_path(output), manifest.dump(2) + "\n");
}

json read_manifest(const std::string& path, const std::string& command) {
    const std::string text = read_bytes(path);
    if (text.empty()) throw ConfigError("cannot read manifest " + path);
    json manifest = json::parse(text, nullptr, false);
    if (manifest.is_discarded() || !manifest.is_object()) throw ConfigError("manifest " + path + " is not a JSON object");
    if (manifest.value("command", std::string()) != command) {
        throw ConfigError("manifest " + path + " was not written by '" + command + "'");
    }
    return manifest;
}

json manifest_base(const std::string& command, const std::string& model_path) {
    json m;
    m["tool"] = "ktemper";
    m["version"] = kVersion;
    m["command"] = command;
    if (!model_path.empty()) {
        m["model"] = fs::absolute(model_path).string();
        m["model_digest"] = io::digest(read_bytes(model_path));
    }
    return m;
}

/// Fills options not given on the command line from a manifest.
struct ManifestFill {
    const json& manifest;
    bool overridden = false;

    template <typename T>
    void operator()(const char* key, const CLI::Option* option, T& value) {
        if (option->count() > 0) {
            overridden = true;
        } else if (manifest.contains(key)) {
            value = manifest.at(key).get<T>();
        }
    }
};

std::string join_sequence(const KoopmanModel& model, const ControlSequence& u) {
    std::string s;
    for (std::size_t t = 0; t < u.size(); ++t) {
        if (t > 0) s += ',';
        s += model.actions()[u[t]];
    }
    return s;
}

void check_model_digest(const json& manifest, const std::string& model_path, std::ostream& err) {
    if (!manifest.contains("model_digest")) return;
    if (manifest.at("model_digest").get<std::string>() != io::digest(read_bytes(model_path))) {
        err << "warning: model file " << model_path << " differs from the one in the manifest\n";
    }
}

int verify_digest(const json& manifest, bool overridden, const std::string& digest, std::ostream& out,
                  std::ostream& err) {
    if (overridden || !manifest.contains("trace_digest")) return kExitOk;
    const auto expected = manifest.at("trace_digest").get<std::string>();
    if (expected == digest) {
        out << "manifest_digest match\n";
        return kExitOk;
    }
    err << "error: trace digest " << digest << " differs from manifest digest " << expected << '\n';
    return kExitData;
}

std::vector<double> running_min(const std::vector<double>& values) {
    std::vector<double> best(values.size());
    double current = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < values.size(); ++k) {
        current = std::min(current, values[k]);
        best[k] = current;
    }
    return best;
}

// ---------------------------------------------------------------- solve

struct SolveArgs {
    std::string model;
    std::string output;
    std::string manifest;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    std::size_t temps = 12;
    double beta_min = 0.5;
    double beta_max = 50.0;
    std::vector<double> betas;
    std::size_t sweeps = 1000;
    std::size_t trace_every = 1;
    std::string kernel = "cached";

    CLI::Option* o_model = nullptr;
    CLI::Option* o_seed = nullptr;
    CLI::Option* o_threads = nullptr;
    CLI::Option* o_temps = nullptr;
    CLI::Option* o_beta_min = nullptr;
    CLI::Option* o_beta_max = nullptr;
    CLI::Option* o_betas = nullptr;
    CLI::Option* o_sweeps = nullptr;
    CLI::Option* o_trace_every = nullptr;
    CLI::Option* o_kernel = nullptr;
};

TemperatureLadder resolve_ladder(const SolveArgs& a) {
    if (!a.betas.empty()) return TemperatureLadder(a.betas);
    if (a.temps == 0) throw ConfigError("--temps must be at least 1");
    if (a.temps == 1) {
        if (a.beta_min != a.beta_max) throw ConfigError("--temps 1 needs --beta-min equal to --beta-max");
        return TemperatureLadder({a.beta_max});
    }
    return make_log_ladder(a.beta_min, a.beta_max, a.temps);
}

int cmd_solve(SolveArgs& a, std::ostream& out, std::ostream& err) {
    json loaded;
    bool overridden = true;
    if (!a.manifest.empty()) {
        loaded = read_manifest(a.manifest, "solve");
        ManifestFill fill{loaded};
        fill("model", a.o_model, a.model);
        fill("seed", a.o_seed, a.seed);
        fill("sweeps", a.o_sweeps, a.sweeps);
        fill("trace_every", a.o_trace_every, a.trace_every);
        fill("kernel", a.o_kernel, a.kernel);
        const bool ladder_flags =
            a.o_temps->count() + a.o_beta_min->count() + a.o_beta_max->count() + a.o_betas->count() > 0;
        if (ladder_flags) {
            fill.overridden = true;
        } else if (loaded.contains("ladder")) {
            a.betas = loaded.at("ladder").get<std::vector<double>>();
        }
        if (a.o_threads->count() == 0 && loaded.contains("threads")) a.threads = loaded.at("threads").get<std::size_t>();
        overridden = fill.overridden;
    }
    if (a.model.empty()) throw ConfigError("--model is required");
    if (a.kernel != "cached" && a.kernel != "reference") throw ConfigError("--kernel must be cached or reference");

    const KoopmanModel model = io::read_model(a.model);
    if (!a.manifest.empty()) check_model_digest(loaded, a.model, err);

    SamplerConfig config;
    config.ladder = resolve_ladder(a);
    config.sweeps = a.sweeps;
    config.seed = a.seed;
    config.threads = a.threads;
    config.trace_every = a.trace_every;
    config.kernel = a.kernel == "cached" ? SweepKernel::cached : SweepKernel::reference;
    config.validate();

    json manifest = manifest_base("solve", a.model);
    manifest["seed"] = a.seed;
    manifest["threads"] = a.threads;
    manifest["kernel"] = a.kernel;
    manifest["sweeps"] = a.sweeps;
    manifest["trace_every"] = a.trace_every;
    manifest["ladder"] = config.ladder.betas();

    auto emit = [&](const SolveResult& result, const char* status) {
        std::ostringstream trace;
        io::write_trace(trace, result, config.ladder);
        const std::string digest = io::digest(trace.str());
        manifest["status"] = status;
        manifest["trace_digest"] = digest;
        if (!a.output.empty()) {
            write_text(a.output, trace.str());
            write_manifest(a.output, manifest);
        }
        return digest;
    };

    SolveResult result;
    try {
        result = solve(model, config);
    } catch (const SolveAborted& e) {
        const std::string digest = emit(e.partial(), "aborted");
        err << "error: " << e.what() << " (after " << e.partial().sweep_count << " sweeps; partial trace "
            << (a.output.empty() ? std::string("not written") : "in " + a.output) << ")\n";
        out << "trace_digest " << digest << '\n';
        return kExitNumeric;
    }
    const std::string digest = emit(result, "ok");

    out << "best_cost " << format_double(result.best_cost) << '\n';
    out << "best_sequence " << join_sequence(model, result.best_sequence) << '\n';
    out << "best_found_at_sweep " << result.best_found_at_sweep << '\n';
    out << "sweeps " << result.sweep_count << '\n';
    out << "replicas " << config.ladder.size() << '\n';
    out << "matvec_count " << result.matvec_count << '\n';
    out << "flip_rate";
    for (std::size_t j = 0; j < result.flip_counts.size(); ++j) {
        out << (j == 0 ? " " : ",")
            << format_double(static_cast<double>(result.flip_counts[j]) / static_cast<double>(result.sweep_count));
    }
    out << '\n';
    out << "wall_time_s " << format_double(result.wall_time) << '\n';
    out << "trace_digest " << digest << '\n';
    if (!a.manifest.empty()) return verify_digest(loaded, overridden, digest, out, err);
    return kExitOk;
}

// ---------------------------------------------------------------- oracle

struct OracleArgs {
    std::string model;
    std::size_t cap = diagnostics::kDefaultEnumerationCap;
};

int cmd_oracle(const OracleArgs& a, std::ostream& out) {
    const KoopmanModel model = io::read_model(a.model);
    const auto minimum = diagnostics::brute_force_min(model, a.cap);
    out << "j_star " << format_double(minimum.j_star) << '\n';
    out << "minimizers " << minimum.minimizers.size() << '\n';
    out << "minimizer " << join_sequence(model, minimum.minimizers.front()) << '\n';
    out << "sequences " << sequence_count(model).str() << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------- diagnose

struct DiagnoseArgs {
    std::string model;
    std::vector<double> betas{1.0};
    std::size_t cap = diagnostics::kDefaultKernelCap;
    std::size_t steps = 12;
    double detailed_tol = 1e-12;
    double global_tol = 1e-10;
};

int cmd_diagnose(const DiagnoseArgs& a, std::ostream& out) {
    const KoopmanModel model = io::read_model(a.model);
    if (a.betas.empty()) throw ConfigError("--beta needs at least one value");
    for (double b : a.betas) {
        if (!(b >= 0.0) || !std::isfinite(b)) throw ConfigError("--beta values must be finite and non-negative");
    }
    const std::size_t states = diagnostics::checked_state_count(model, a.cap);
    bool pass = true;
    out << "states " << states << '\n';

    for (double beta : a.betas) {
        out << "beta " << format_double(beta) << '\n';
        const auto target = diagnostics::boltzmann(model, beta, a.cap);
        for (std::size_t t = 0; t < model.horizon(); ++t) {
            const auto kernel = diagnostics::gibbs_kernel(model, beta, t, a.cap);
            const double r = diagnostics::detailed_balance_residual(kernel.P, target.probs);
            pass = pass && r <= a.detailed_tol;
            out << "  detailed_balance step " << t << ' ' << format_double(r) << '\n';
        }
        const auto sweep = diagnostics::sweep_kernel(model, beta, a.cap);
        const double global = diagnostics::global_balance_residual(sweep.P, target.probs);
        pass = pass && global <= a.global_tol;
        out << "  sweep_global_balance " << format_double(global) << '\n';

        const bool regular = diagnostics::is_regular(sweep.P);
        out << "  regular " << (regular ? "yes" : "no") << '\n';
        if (regular) {
            const Vector pi = diagnostics::stationary_distribution(sweep.P);
            out << "  stationary_l1_vs_boltzmann " << format_double((pi - target.probs).lpNorm<1>()) << '\n';
            const double spread = pi.maxCoeff() - pi.minCoeff();
            out << "  stationary_uniform " << (spread <= 1e-12 ? "yes" : "no") << '\n';
            out << "  stationary_max " << format_double(pi.maxCoeff()) << '\n';
            out << "  stationary_min " << format_double(pi.minCoeff()) << '\n';
        }
        const auto hoffman = diagnostics::hoffman_bound(sweep.P);
        out << "  hoffman_lambda " << format_double(hoffman.lambda_bound) << '\n';
        out << "  hoffman_mixing " << format_double(hoffman.mixing_bound) << '\n';

        Vector start = Vector::Zero(static_cast<Eigen::Index>(states));
        start[0] = 1.0;
        const auto profile = diagnostics::convergence_profile(sweep.P, start, target.probs, a.steps);
        out << "  convergence_l1";
        for (double v : profile) out << ' ' << format_double(v);
        out << '\n';
    }

    if (a.betas.size() >= 2) {
        const double joint = std::pow(static_cast<double>(states), static_cast<double>(a.betas.size()));
        if (joint <= static_cast<double>(a.cap)) {
            const Matrix kernel = diagnostics::tempering_kernel(model, a.betas, a.cap);
            const Vector pi = diagnostics::tempering_joint_distribution(model, a.betas, a.cap);
            const double global = diagnostics::global_balance_residual(kernel, pi);
            pass = pass && global <= a.global_tol;
            out << "tempering_global_balance " << format_double(global) << '\n';
        } else {
            out << "tempering_global_balance skipped (joint states above cap)\n";
        }
    }
    out << "status " << (pass ? "pass" : "fail") << '\n';
    return pass ? kExitOk : kExitNumeric;
}

// ---------------------------------------------------------------- relax

struct RelaxArgs {
    std::string model;
    std::string output;
    std::string manifest;
    std::uint64_t seed = 0;
    double eta = 0.5;
    std::size_t iterations = 200;
    double jitter = 0.0;

    CLI::Option* o_model = nullptr;
    CLI::Option* o_seed = nullptr;
    CLI::Option* o_eta = nullptr;
    CLI::Option* o_iterations = nullptr;
    CLI::Option* o_jitter = nullptr;
};

int cmd_relax(RelaxArgs& a, std::ostream& out, std::ostream& err) {
    json loaded;
    bool overridden = true;
    if (!a.manifest.empty()) {
        loaded = read_manifest(a.manifest, "relax");
        ManifestFill fill{loaded};
        fill("model", a.o_model, a.model);
        fill("seed", a.o_seed, a.seed);
        fill("eta", a.o_eta, a.eta);
        fill("iterations", a.o_iterations, a.iterations);
        fill("init_jitter", a.o_jitter, a.jitter);
        overridden = fill.overridden;
    }
    if (a.model.empty()) throw ConfigError("--model is required");
    const KoopmanModel model = io::read_model(a.model);
    if (!a.manifest.empty()) check_model_digest(loaded, a.model, err);

    baselines::GradientConfig config;
    config.eta = a.eta;
    config.iterations = a.iterations;
    config.seed = a.seed;
    config.init_jitter = a.jitter;
    const auto result = baselines::gradient_solve(model, config);

    std::ostringstream trace;
    io::write_baseline_trace(trace, result.rounded_history, running_min(result.rounded_history));
    const std::string digest = io::digest(trace.str());

    json manifest = manifest_base("relax", a.model);
    manifest["seed"] = a.seed;
    manifest["eta"] = config.eta;
    manifest["iterations"] = config.iterations;
    manifest["beta1"] = config.beta1;
    manifest["beta2"] = config.beta2;
    manifest["epsilon"] = config.epsilon;
    manifest["init_jitter"] = config.init_jitter;
    manifest["trace_digest"] = digest;
    if (!a.output.empty()) {
        write_text(a.output, trace.str());
        write_manifest(a.output, manifest);
    }

    out << "relaxed_cost " << format_double(result.relaxed) << '\n';
    out << "rounded_cost " << format_double(result.rounded_cost) << '\n';
    out << "rounded_sequence " << join_sequence(model, result.rounded) << '\n';
    out << "iterations " << config.iterations << '\n';
    out << "wall_time_s " << format_double(result.wall_time) << '\n';
    out << "trace_digest " << digest << '\n';
    if (!a.manifest.empty()) return verify_digest(loaded, overridden, digest, out, err);
    return kExitOk;
}

// ---------------------------------------------------------------- ga

struct GAArgs {
    std::string model;
    std::string output;
    std::string manifest;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    std::size_t population = 50;
    std::size_t generations = 100;
    std::size_t mu = 2;
    double mutation_rate = 0.10;
    double gene_rate = 0.05;

    CLI::Option* o_model = nullptr;
    CLI::Option* o_seed = nullptr;
    CLI::Option* o_threads = nullptr;
    CLI::Option* o_population = nullptr;
    CLI::Option* o_generations = nullptr;
    CLI::Option* o_mu = nullptr;
    CLI::Option* o_mutation = nullptr;
    CLI::Option* o_gene = nullptr;
};

int cmd_ga(GAArgs& a, std::ostream& out, std::ostream& err) {
    json loaded;
    bool overridden = true;
    if (!a.manifest.empty()) {
        loaded = read_manifest(a.manifest, "ga");
        ManifestFill fill{loaded};
        fill("model", a.o_model, a.model);
        fill("seed", a.o_seed, a.seed);
        fill("population", a.o_population, a.population);
        fill("generations", a.o_generations, a.generations);
        fill("selection_mu", a.o_mu, a.mu);
        fill("mutation_rate", a.o_mutation, a.mutation_rate);
        fill("gene_mutation_prob", a.o_gene, a.gene_rate);
        if (a.o_threads->count() == 0 && loaded.contains("threads")) a.threads = loaded.at("threads").get<std::size_t>();
        overridden = fill.overridden;
    }
    if (a.model.empty()) throw ConfigError("--model is required");
    const KoopmanModel model = io::read_model(a.model);
    if (!a.manifest.empty()) check_model_digest(loaded, a.model, err);

    baselines::GAConfig config;
    config.population = a.population;
    config.generations = a.generations;
    config.selection_mu = a.mu;
    config.mutation_rate = a.mutation_rate;
    config.gene_mutation_prob = a.gene_rate;
    config.seed = a.seed;
    config.threads = a.threads;
    const auto result = baselines::genetic_solve(model, config);

    std::ostringstream trace;
    io::write_baseline_trace(trace, result.generation_best, result.history);
    const std::string digest = io::digest(trace.str());

    json manifest = manifest_base("ga", a.model);
    manifest["seed"] = a.seed;
    manifest["threads"] = a.threads;
    manifest["population"] = config.population;
    manifest["generations"] = config.generations;
    manifest["selection_mu"] = config.selection_mu;
    manifest["single_point_crossover"] = config.single_point_crossover;
    manifest["mutation_rate"] = config.mutation_rate;
    manifest["gene_mutation_prob"] = config.gene_mutation_prob;
    manifest["trace_digest"] = digest;
    if (!a.output.empty()) {
        write_text(a.output, trace.str());
        write_manifest(a.output, manifest);
    }

    out << "best_cost " << format_double(result.best_cost) << '\n';
    out << "best_sequence " << join_sequence(model, result.best) << '\n';
    out << "generations " << config.generations << '\n';
    out << "wall_time_s " << format_double(result.wall_time) << '\n';
    out << "trace_digest " << digest << '\n';
    if (!a.manifest.empty()) return verify_digest(loaded, overridden, digest, out, err);
    return kExitOk;
}

// ---------------------------------------------------------------- fit

struct FitArgs {
    std::string data;
    std::string basis;
    std::string output;
    std::vector<double> cost;
    long cost_index = -1;
    std::vector<double> initial;
    std::size_t horizon = 10;
    std::vector<std::string> labels;
    std::size_t threads = 1;
    double rank_tolerance = 1e-10;
};

int cmd_fit(const FitArgs& a, std::ostream& out, std::ostream& err) {
    if (a.cost.empty() == (a.cost_index < 0)) throw ConfigError("give exactly one of --cost and --cost-index");
    const auto dataset = io::read_dataset(a.data);
    std::optional<edmd::ObservableBasis> basis;
    if (!a.basis.empty()) basis = io::read_basis(a.basis);
    if (!dataset.prelifted && !basis) throw ConfigError("a raw dataset needs --basis");
    if (dataset.prelifted && basis) throw ConfigError("a prelifted dataset takes no --basis");
    if (dataset.trajectories.empty()) throw InputError("dataset has no transitions");

    edmd::CostSpec cost;
    if (!a.cost.empty()) {
        cost.row = RowVector::Map(a.cost.data(), static_cast<Eigen::Index>(a.cost.size()));
    } else {
        const auto k = static_cast<Eigen::Index>(a.cost_index);
        if (k >= dataset.trajectories.front().states.front().size()) {
            throw ConfigError("--cost-index is outside the raw state");
        }
        cost.observable = [k](const Vector& raw) { return raw[k]; };
    }
    Vector initial = dataset.trajectories.front().states.front();
    if (!a.initial.empty()) initial = Vector::Map(a.initial.data(), static_cast<Eigen::Index>(a.initial.size()));

    edmd::FitOptions options;
    options.rank_tolerance = a.rank_tolerance;
    options.threads = a.threads;
    const auto fit = edmd::fit_koopman(dataset, basis ? &*basis : nullptr, cost, initial, a.horizon, a.labels, options);
    io::write_model(a.output, fit.model);

    json manifest;
    manifest["tool"] = "ktemper";
    manifest["version"] = kVersion;
    manifest["command"] = "fit";
    manifest["data"] = fs::absolute(a.data).string();
    manifest["data_digest"] = io::digest(read_bytes(a.data));
    if (!a.basis.empty()) manifest["basis"] = fs::absolute(a.basis).string();
    if (!a.cost.empty()) manifest["cost"] = a.cost;
    if (a.cost_index >= 0) manifest["cost_index"] = a.cost_index;
    manifest["initial"] = std::vector<double>(initial.data(), initial.data() + initial.size());
    manifest["horizon"] = a.horizon;
    manifest["rank_tolerance"] = a.rank_tolerance;
    manifest["model_digest"] = io::digest(read_bytes(a.output));
    write_manifest(a.output, manifest);

    out << "n_psi " << fit.model.lifted_dim() << '\n';
    for (std::size_t u = 0; u < fit.model.action_count(); ++u) {
        out << "action " << u << ' ' << fit.model.actions()[u] << " transitions " << fit.transitions[u] << " rank "
            << fit.rank[u] << " residual " << format_double(fit.residual[u]) << '\n';
    }
    for (const auto& w : fit.warnings) err << "warning: " << w << '\n';
    out << "model " << a.output << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
    std::vector<std::size_t> horizons{10, 20};
    std::vector<std::size_t> dims{64};
    std::vector<std::size_t> temps{4};
    std::vector<std::size_t> threads{1};
    std::size_t actions = 4;
    std::size_t repeats = 5;
    std::string kernel = "cached";
    std::uint64_t seed = 0;
    std::string output;
};

int cmd_bench(const BenchArgs& a, std::ostream& out) {
    std::vector<SweepKernel> kernels;
    if (a.kernel == "cached" || a.kernel == "both") kernels.push_back(SweepKernel::cached);
    if (a.kernel == "reference" || a.kernel == "both") kernels.push_back(SweepKernel::reference);
    if (kernels.empty()) throw ConfigError("--kernel must be cached, reference or both");

    std::ofstream file;
    if (!a.output.empty()) {
        file.open(a.output);
        if (!file) throw ConfigError("cannot write " + a.output);
    }
    std::ostream& sink = a.output.empty() ? out : file;
    bench::write_header(sink);
    for (SweepKernel kernel : kernels) {
        for (const auto& c : bench::grid(a.horizons, a.dims, a.temps, a.threads, a.actions, a.repeats, kernel, a.seed)) {
            bench::write_row(sink, bench::run_case(c));
            sink.flush();
        }
    }
    return kExitOk;
}

// ---------------------------------------------------------------- check-trace

int cmd_check_trace(const std::string& path, std::ostream& out, std::ostream& err) {
    std::ifstream in(path);
    if (!in) {
        err << "error: cannot open trace " << path << '\n';
        return kExitData;
    }
    const auto check = io::check_trace(in);
    out << "rows " << check.rows << '\n';
    for (const auto& e : check.errors) err << path << ": " << e << '\n';
    out << (check.ok() ? "ok" : "invalid") << '\n';
    return check.ok() ? kExitOk : kExitData;
}

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Koopman optimal control by Gibbs sampling with parallel tempering", "ktemper"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    std::size_t env_threads = 1;
    std::string env_error;
    try {
        env_threads = default_threads();
    } catch (const ConfigError& e) {
        env_error = e.what();
    }

    SolveArgs sa;
    sa.threads = env_threads;
    auto* solve_cmd = app.add_subcommand("solve", "Gibbs sampling with parallel tempering");
    sa.o_model = solve_cmd->add_option("--model", sa.model, "model file (JSON)");
    solve_cmd->add_option("--output", sa.output, "trace file; the manifest goes to <output>.manifest.json");
    sa.o_seed = solve_cmd->add_option("--seed", sa.seed, "random seed");
    sa.o_threads = solve_cmd->add_option("--threads", sa.threads, "worker threads")->check(CLI::PositiveNumber);
    sa.o_temps = solve_cmd->add_option("--temps", sa.temps, "number of temperatures (log-spaced)");
    sa.o_beta_min = solve_cmd->add_option("--beta-min", sa.beta_min, "hottest inverse temperature");
    sa.o_beta_max = solve_cmd->add_option("--beta-max", sa.beta_max, "coldest inverse temperature");
    sa.o_betas = solve_cmd->add_option("--beta", sa.betas, "explicit ladder, comma separated")->delimiter(',');
    sa.o_sweeps = solve_cmd->add_option("--sweeps", sa.sweeps, "tempering iterations");
    sa.o_trace_every = solve_cmd->add_option("--trace-every", sa.trace_every, "record every k-th sweep");
    sa.o_kernel = solve_cmd->add_option("--kernel", sa.kernel, "cached or reference");
    solve_cmd->add_option("--manifest", sa.manifest, "rerun from a manifest");

    OracleArgs oa;
    auto* oracle_cmd = app.add_subcommand("oracle", "exact minimum by enumeration");
    oracle_cmd->add_option("--model", oa.model, "model file")->required();
    oracle_cmd->add_option("--cap", oa.cap, "maximum number of sequences");

    DiagnoseArgs da;
    auto* diagnose_cmd = app.add_subcommand("diagnose", "balance, stationarity and mixing checks");
    diagnose_cmd->add_option("--model", da.model, "model file")->required();
    diagnose_cmd->add_option("--beta", da.betas, "inverse temperatures, comma separated")->delimiter(',');
    diagnose_cmd->add_option("--cap", da.cap, "maximum number of states");
    diagnose_cmd->add_option("--steps", da.steps, "length of the convergence profile");
    diagnose_cmd->add_option("--detailed-tol", da.detailed_tol, "detailed balance threshold");
    diagnose_cmd->add_option("--global-tol", da.global_tol, "global balance threshold");

    RelaxArgs ra;
    auto* relax_cmd = app.add_subcommand("relax", "projected gradient on the continuous relaxation");
    ra.o_model = relax_cmd->add_option("--model", ra.model, "model file");
    relax_cmd->add_option("--output", ra.output, "trace file");
    ra.o_seed = relax_cmd->add_option("--seed", ra.seed, "random seed");
    ra.o_eta = relax_cmd->add_option("--eta", ra.eta, "step size");
    ra.o_iterations = relax_cmd->add_option("--iterations", ra.iterations, "iterations");
    ra.o_jitter = relax_cmd->add_option("--jitter", ra.jitter, "random perturbation of the start");
    relax_cmd->add_option("--manifest", ra.manifest, "rerun from a manifest");

    GAArgs ga;
    ga.threads = env_threads;
    auto* ga_cmd = app.add_subcommand("ga", "genetic algorithm");
    ga.o_model = ga_cmd->add_option("--model", ga.model, "model file");
    ga_cmd->add_option("--output", ga.output, "trace file");
    ga.o_seed = ga_cmd->add_option("--seed", ga.seed, "random seed");
    ga.o_threads = ga_cmd->add_option("--threads", ga.threads, "worker threads")->check(CLI::PositiveNumber);
    ga.o_population = ga_cmd->add_option("--population", ga.population, "population size");
    ga.o_generations = ga_cmd->add_option("--generations", ga.generations, "generations");
    ga.o_mu = ga_cmd->add_option("--mu", ga.mu, "number of parents selected");
    ga.o_mutation = ga_cmd->add_option("--mutation-rate", ga.mutation_rate, "probability an offspring mutates");
    ga.o_gene = ga_cmd->add_option("--gene-rate", ga.gene_rate, "per-gene mutation probability");
    ga_cmd->add_option("--manifest", ga.manifest, "rerun from a manifest");

    FitArgs fa;
    fa.threads = env_threads;
    auto* fit_cmd = app.add_subcommand("fit", "least-squares fit of the lifted dynamics");
    fit_cmd->add_option("--data", fa.data, "trajectory dataset")->required();
    fit_cmd->add_option("--basis", fa.basis, "observable basis file");
    fit_cmd->add_option("--output", fa.output, "model file to write")->required();
    fit_cmd->add_option("--cost", fa.cost, "cost row in lifted coordinates")->delimiter(',');
    fit_cmd->add_option("--cost-index", fa.cost_index, "raw state coordinate used as the cost observable");
    fit_cmd->add_option("--initial", fa.initial, "initial raw (or lifted) state")->delimiter(',');
    fit_cmd->add_option("--horizon", fa.horizon, "horizon of the written model");
    fit_cmd->add_option("--labels", fa.labels, "action labels")->delimiter(',');
    fit_cmd->add_option("--threads", fa.threads, "worker threads")->check(CLI::PositiveNumber);
    fit_cmd->add_option("--rank-tol", fa.rank_tolerance, "relative rank threshold");

    BenchArgs ba;
    auto* bench_cmd = app.add_subcommand("bench", "time Gibbs sweeps over a parameter grid");
    bench_cmd->add_option("--horizons", ba.horizons, "horizons")->delimiter(',');
    bench_cmd->add_option("--dims", ba.dims, "lifted dimensions")->delimiter(',');
    bench_cmd->add_option("--temps", ba.temps, "replica counts")->delimiter(',');
    bench_cmd->add_option("--threads", ba.threads, "thread counts")->delimiter(',');
    bench_cmd->add_option("--actions", ba.actions, "number of actions");
    bench_cmd->add_option("--repeats", ba.repeats, "timed sweeps per case");
    bench_cmd->add_option("--kernel", ba.kernel, "cached, reference or both");
    bench_cmd->add_option("--seed", ba.seed, "model seed");
    bench_cmd->add_option("--output", ba.output, "results file (default: standard output)");

    std::string trace_path;
    auto* check_cmd = app.add_subcommand("check-trace", "validate a trace file");
    check_cmd->add_option("trace", trace_path, "trace file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }
    // A bad environment value only matters where --threads was not given.
    if (!env_error.empty()) {
        const CLI::App* used = app.get_subcommands().front();
        if ((used == solve_cmd || used == ga_cmd || used == fit_cmd) && used->get_option("--threads")->count() == 0) {
            throw ConfigError(env_error);
        }
    }

    if (app.got_subcommand(solve_cmd)) return cmd_solve(sa, out, err);
    if (app.got_subcommand(oracle_cmd)) return cmd_oracle(oa, out);
    if (app.got_subcommand(diagnose_cmd)) return cmd_diagnose(da, out);
    if (app.got_subcommand(relax_cmd)) return cmd_relax(ra, out, err);
    if (app.got_subcommand(ga_cmd)) return cmd_ga(ga, out, err);
    if (app.got_subcommand(fit_cmd)) return cmd_fit(fa, out, err);
    if (app.got_subcommand(bench_cmd)) return cmd_bench(ba, out);
    return cmd_check_trace(trace_path, out, err);
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    try {
        return dispatch(argc, argv, out, err);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ParseError& e) {
        err << "parse error: " << e.what() << '\n';
        return kExitParse;
    } catch (const ModelError& e) {
        err << "model error: " << e.what() << '\n';
        return kExitParse;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const EnumerationRefused& e) {
        err << "cap exceeded: " << e.what() << '\n';
        return kExitCap;
    } catch (const FitError& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const InputError& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const SequenceError& e) {
        err << "data error: " << e.what() << '\n';
        return kExitData;
    } catch (const nlohmann::json::exception& e) {
        err << "config error: malformed manifest: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv;
    argv.push_back("ktemper");
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace ktemper::cli
