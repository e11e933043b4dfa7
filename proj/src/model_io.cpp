#include "ktemper/model_io.hpp"

#include "ktemper/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace ktemper::io {

using nlohmann::json;

namespace {

std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
    std::size_t line = 1;
    std::size_t column = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return {line, column};
}

const json& require(const json& doc, const char* key) {
    const auto it = doc.find(key);
    if (it == doc.end()) throw ParseError(std::string("model file is missing key \"") + key + "\"");
    return *it;
}

std::vector<double> numbers(const json& node, const std::string& what, std::size_t expected) {
    if (!node.is_array()) throw ParseError(what + " must be an array of numbers");
    if (node.size() != expected) {
        std::ostringstream os;
        os << what << " has " << node.size() << " entries, expected " << expected;
        throw ParseError(os.str());
    }
    std::vector<double> out;
    out.reserve(node.size());
    for (std::size_t i = 0; i < node.size(); ++i) {
        if (!node[i].is_number()) throw ParseError(what + "[" + std::to_string(i) + "] is not a number");
        out.push_back(node[i].get<double>());
    }
    return out;
}

std::size_t positive_integer(const json& node, const char* key) {
    if (!node.is_number_integer() || node.get<long long>() <= 0) {
        throw ParseError(std::string("\"") + key + "\" must be a positive integer");
    }
    return node.get<std::size_t>();
}

std::vector<double> parse_row(const std::string& line, std::size_t line_no) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= line.size()) {
        std::size_t end = line.find(',', pos);
        if (end == std::string::npos) end = line.size();
        std::string field = line.substr(pos, end - pos);
        const auto first = field.find_first_not_of(" \t\r");
        const auto last = field.find_last_not_of(" \t\r");
        field = first == std::string::npos ? std::string{} : field.substr(first, last - first + 1);
        if (field.empty()) throw ParseError("empty field", line_no, pos + 1);
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(field, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != field.size()) throw ParseError("not a number: \"" + field + "\"", line_no, pos + 1);
        out.push_back(v);
        pos = end + 1;
    }
    return out;
}

}  // namespace

std::string format_double(double value) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.17g", value);
    return buffer;
}

KoopmanModel parse_model(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        const auto [line, column] = line_column(text, e.byte == 0 ? 0 : e.byte - 1);
        std::ostringstream os;
        os << "model file syntax error at line " << line << ", column " << column << ": " << e.what();
        throw ParseError(os.str(), line, column);
    }
    if (!doc.is_object()) throw ParseError("model file must contain a JSON object", 1, 1);

    const std::size_t n = positive_integer(require(doc, "n_psi"), "n_psi");
    const std::size_t horizon = positive_integer(require(doc, "horizon"), "horizon");

    const json& actions_node = require(doc, "actions");
    if (!actions_node.is_array() || actions_node.empty()) throw ParseError("\"actions\" must be a non-empty array");
    std::vector<std::string> actions;
    for (const auto& a : actions_node) {
        if (a.is_string()) {
            actions.push_back(a.get<std::string>());
        } else if (a.is_number_integer()) {
            actions.push_back(std::to_string(a.get<long long>()));
        } else {
            throw ParseError("\"actions\" entries must be strings");
        }
    }

    const json& a_node = require(doc, "A");
    if (!a_node.is_array() || a_node.size() != actions.size()) {
        throw ParseError("\"A\" must hold one matrix per action (" + std::to_string(actions.size()) + ")");
    }
    std::vector<Matrix> dynamics;
    for (std::size_t k = 0; k < actions.size(); ++k) {
        const auto values = numbers(a_node[k], "A[" + std::to_string(k) + "]", n * n);
        Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = values[i * n + j];
        dynamics.push_back(std::move(m));
    }
    const auto c_values = numbers(require(doc, "c"), "c", n);
    const auto psi_values = numbers(require(doc, "psi1"), "psi1", n);
    RowVector c = Eigen::Map<const RowVector>(c_values.data(), static_cast<Eigen::Index>(n));
    Vector psi1 = Eigen::Map<const Vector>(psi_values.data(), static_cast<Eigen::Index>(n));

    std::optional<KoopmanModel::ActionMask> mask;
    if (const auto it = doc.find("action_mask"); it != doc.end() && !it->is_null()) {
        if (!it->is_array()) throw ParseError("\"action_mask\" must be an array of index lists");
        KoopmanModel::ActionMask m;
        for (const auto& step : *it) {
            if (!step.is_array()) throw ParseError("\"action_mask\" entries must be arrays");
            std::vector<Action> allowed;
            for (const auto& a : step) {
                if (!a.is_number_integer() || a.get<long long>() < 0) {
                    throw ParseError("\"action_mask\" entries must be non-negative action indices");
                }
                allowed.push_back(a.get<Action>());
            }
            m.push_back(std::move(allowed));
        }
        mask = std::move(m);
    }

    try {
        return KoopmanModel(std::move(actions), std::move(dynamics), std::move(c), std::move(psi1), horizon,
                            std::move(mask));
    } catch (const ModelError& e) {
        throw ParseError(std::string("invalid model: ") + e.what());
    }
}

KoopmanModel read_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open model file " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    try {
        return parse_model(buffer.str());
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), e.line(), e.column());
    }
}

std::string model_to_json(const KoopmanModel& model) {
    // Numbers are written by hand so they round-trip bit-exactly.
    std::ostringstream os;
    const std::size_t n = model.lifted_dim();
    auto write_list = [&](auto begin, auto end) {
        os << '[';
        for (auto it = begin; it != end; ++it) {
            if (it != begin) os << ", ";
            os << format_double(*it);
        }
        os << ']';
    };
    os << "{\n  \"n_psi\": " << n << ",\n  \"horizon\": " << model.horizon() << ",\n  \"actions\": [";
    for (std::size_t a = 0; a < model.action_count(); ++a) {
        if (a) os << ", ";
        os << json(model.actions()[a]).dump();
    }
    os << "],\n  \"A\": [";
    for (std::size_t a = 0; a < model.action_count(); ++a) {
        if (a) os << ",";
        os << "\n    ";
        std::vector<double> row_major;
        row_major.reserve(n * n);
        const Matrix& m = model.dynamics(a);
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) row_major.push_back(m(i, j));
        write_list(row_major.begin(), row_major.end());
    }
    os << "\n  ],\n  \"c\": ";
    write_list(model.cost_row().begin(), model.cost_row().end());
    os << ",\n  \"psi1\": ";
    write_list(model.initial_state().begin(), model.initial_state().end());
    if (model.mask()) os << ",\n  \"action_mask\": " << json(*model.mask()).dump();
    os << "\n}\n";
    return os.str();
}

void write_model(const std::filesystem::path& path, const KoopmanModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write model file " + path.string());
    out << model_to_json(model);
}

edmd::TrajectoryDataset parse_dataset(std::istream& in) {
    edmd::TrajectoryDataset data;
    std::string line;
    std::size_t line_no = 0;
    std::size_t declared_actions = 0;
    std::size_t dim = 0;
    bool have_header = false;
    std::size_t max_action = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        if (line[0] == '#') {
            std::istringstream directive(line.substr(1));
            std::string key;
            directive >> key;
            if (key == "prelifted") {
                data.prelifted = true;
            } else if (key == "actions") {
                if (!(directive >> declared_actions) || declared_actions == 0) {
                    throw ParseError("\"# actions\" needs a positive count", line_no, 1);
                }
            }
            continue;
        }
        if (!have_header) {
            std::size_t columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
            if (line.rfind("action", 0) != 0 || columns < 3 || (columns - 1) % 2 != 0) {
                throw ParseError("expected header \"action,x0..,y0..\" with matching x and y columns", line_no, 1);
            }
            dim = (columns - 1) / 2;
            have_header = true;
            continue;
        }
        const auto row = parse_row(line, line_no);
        if (row.size() != 2 * dim + 1) {
            std::ostringstream os;
            os << "row has " << row.size() << " fields, expected " << 2 * dim + 1;
            throw ParseError(os.str(), line_no, 1);
        }
        if (row[0] < 0 || row[0] != static_cast<double>(static_cast<long long>(row[0]))) {
            throw ParseError("action must be a non-negative integer", line_no, 1);
        }
        const auto action = static_cast<Action>(row[0]);
        max_action = std::max(max_action, action);
        edmd::Trajectory tr;
        tr.states.push_back(Eigen::Map<const Vector>(row.data() + 1, static_cast<Eigen::Index>(dim)));
        tr.states.push_back(Eigen::Map<const Vector>(row.data() + 1 + dim, static_cast<Eigen::Index>(dim)));
        tr.actions.push_back(action);
        data.trajectories.push_back(std::move(tr));
    }
    if (!have_header) throw ParseError("dataset has no header row");
    if (data.trajectories.empty()) throw ParseError("dataset has no transitions");
    data.action_count = declared_actions ? declared_actions : max_action + 1;
    if (max_action >= data.action_count) throw ParseError("dataset uses an action beyond the declared count");
    return data;
}

edmd::TrajectoryDataset read_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open dataset file " + path.string());
    try {
        return parse_dataset(in);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), e.line(), e.column());
    }
}

void write_dataset(std::ostream& out, const edmd::TrajectoryDataset& data) {
    if (data.prelifted) out << "# prelifted\n";
    out << "# actions " << data.action_count << "\n";
    std::size_t dim = 0;
    for (const auto& tr : data.trajectories) {
        if (!tr.states.empty()) {
            dim = static_cast<std::size_t>(tr.states.front().size());
            break;
        }
    }
    out << "action";
    for (std::size_t i = 0; i < dim; ++i) out << ",x" << i;
    for (std::size_t i = 0; i < dim; ++i) out << ",y" << i;
    out << '\n';
    for (const auto& tr : data.trajectories) {
        for (std::size_t k = 0; k < tr.actions.size(); ++k) {
            out << tr.actions[k];
            for (double v : tr.states[k]) out << ',' << format_double(v);
            for (double v : tr.states[k + 1]) out << ',' << format_double(v);
            out << '\n';
        }
    }
}

edmd::ObservableBasis read_basis(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open basis file " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    edmd::ObservableBasis basis;
    try {
        basis.lambda = doc.at("lambda").get<double>();
        basis.extra_affine = doc.value("affine", false);
        for (const auto& c : doc.at("centers")) {
            const auto values = c.get<std::vector<double>>();
            basis.centers.push_back(Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size())));
        }
        basis.validate();
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    } catch (const InputError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return basis;
}

}  // namespace ktemper::io
