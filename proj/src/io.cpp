#include "qdev/io.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace qdev::io {

namespace {

std::string at(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }
std::string field(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

void check_keys(const Json& j, const std::set<std::string>& allowed, const std::string& path) {
    if (!j.is_object()) throw SchemaError("expected an object", path.empty() ? "$" : path);
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) throw SchemaError("unknown field '" + it.key() + "'", field(path, it.key()));
}

double number(const Json& j, const std::string& path) {
    if (!j.is_number()) throw SchemaError("expected a number", path);
    return j.get<double>();
}

Index integer(const Json& j, const std::string& path) {
    if (!j.is_number_integer()) throw SchemaError("expected an integer", path);
    return j.get<Index>();
}

cplx entry(const Json& j, const std::string& path) {
    if (j.is_number()) return {j.get<double>(), 0.0};
    if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
        return {j[0].get<double>(), j[1].get<double>()};
    throw SchemaError("expected a number or an [re, im] pair", path);
}

}  // namespace

Matrix matrix_from_json(const Json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) throw SchemaError("expected a non-empty array of rows", path);
    const std::size_t rows = j.size();
    std::size_t cols = 0;
    for (std::size_t i = 0; i < rows; ++i) {
        if (!j[i].is_array() || j[i].empty()) throw SchemaError("expected a non-empty row", at(path, i));
        if (i == 0) cols = j[i].size();
        if (j[i].size() != cols) throw SchemaError("ragged matrix rows", at(path, i));
    }
    Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t k = 0; k < cols; ++k)
            m(static_cast<Index>(i), static_cast<Index>(k)) = entry(j[i][k], at(at(path, i), k));
    return m;
}

Json matrix_to_json(const Matrix& m) {
    Json out = Json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Index k = 0; k < m.cols(); ++k) row.push_back(Json::array({m(i, k).real(), m(i, k).imag()}));
        out.push_back(std::move(row));
    }
    return out;
}

std::vector<double> doubles_from_json(const Json& j, const std::string& path) {
    if (j.is_number()) return {j.get<double>()};
    if (!j.is_array()) throw SchemaError("expected a number or an array of numbers", path);
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], at(path, i)));
    return out;
}

RealVector real_vector_from_json(const Json& j, const std::string& path) {
    std::vector<double> v = doubles_from_json(j, path);
    return Eigen::Map<const RealVector>(v.data(), static_cast<Index>(v.size()));
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file for reading", path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open file for writing", path);
    out << content;
    out.flush();
    if (!out) throw IoError("write failed", path);
}

Json parse_json(const std::string& text, const std::string& what) {
    try {
        return Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw MalformedJson(e.what(), what);
    }
}

Json read_json_file(const std::string& path) { return parse_json(read_text_file(path), path); }

void write_json_file(const std::string& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

ModelFile model_from_json(const Json& j) {
    check_keys(j, {"name", "dim", "hamiltonian", "jumps", "parameters", "observables"}, "");
    if (!j.contains("jumps")) throw SchemaError("missing field", "jumps");
    const Json& jj = j["jumps"];
    if (!jj.is_array() || jj.empty()) throw SchemaError("expected a non-empty array of matrices", "jumps");
    std::vector<Matrix> jumps;
    for (std::size_t i = 0; i < jj.size(); ++i) jumps.push_back(matrix_from_json(jj[i], at("jumps", i)));
    const Index d = jumps.front().rows();
    if (j.contains("dim") && integer(j["dim"], "dim") != d) throw SchemaError("dim disagrees with the jump size", "dim");
    for (std::size_t i = 0; i < jumps.size(); ++i)
        if (jumps[i].rows() != d || jumps[i].cols() != d)
            throw SchemaError("jump operators must be square and of equal size", at("jumps", i));
    Matrix h = Matrix::Zero(d, d);
    if (j.contains("hamiltonian")) {
        h = matrix_from_json(j["hamiltonian"], "hamiltonian");
        if (h.rows() != d || h.cols() != d) throw SchemaError("hamiltonian size differs from the jumps", "hamiltonian");
    }
    std::vector<NamedObservable> obs;
    if (j.contains("observables")) {
        const Json& jo = j["observables"];
        if (!jo.is_array()) throw SchemaError("expected an array", "observables");
        for (std::size_t i = 0; i < jo.size(); ++i) {
            const std::string p = at("observables", i);
            check_keys(jo[i], {"name", "matrix"}, p);
            if (!jo[i].contains("name") || !jo[i]["name"].is_string()) throw SchemaError("missing name", field(p, "name"));
            if (!jo[i].contains("matrix")) throw SchemaError("missing field", field(p, "matrix"));
            Matrix m = matrix_from_json(jo[i]["matrix"], field(p, "matrix"));
            if (m.rows() != d || m.cols() != d) throw SchemaError("observable size differs from the model", field(p, "matrix"));
            obs.push_back({jo[i]["name"].get<std::string>(), m});
        }
    }
    std::string name = "model";
    if (j.contains("name")) {
        if (!j["name"].is_string()) throw SchemaError("expected a string", "name");
        name = j["name"].get<std::string>();
    }
    return {name, Lindbladian(h, std::move(jumps)), std::move(obs), j.value("parameters", Json::object())};
}

ModelFile load_model(const std::string& path) {
    try {
        return model_from_json(read_json_file(path));
    } catch (const SchemaError& e) {
        throw SchemaError(e.what(), path + ":" + e.context());
    }
}

Json model_to_json(const std::string& name, const Lindbladian& l, const Json& parameters,
                   const std::vector<NamedObservable>& observables) {
    Json j = Json::object();
    j["name"] = name;
    j["dim"] = l.dim();
    j["parameters"] = parameters;
    j["hamiltonian"] = matrix_to_json(l.hamiltonian());
    Json jumps = Json::array();
    for (const Matrix& m : l.jumps()) jumps.push_back(matrix_to_json(m));
    j["jumps"] = std::move(jumps);
    if (!observables.empty()) {
        Json obs = Json::array();
        for (const NamedObservable& o : observables) obs.push_back({{"name", o.name}, {"matrix", matrix_to_json(o.matrix)}});
        j["observables"] = std::move(obs);
    }
    return j;
}

SetupFile setup_from_json(const Json& j) {
    check_keys(j, {"directions", "q"}, "");
    if (!j.contains("directions")) throw SchemaError("missing field", "directions");
    if (!j.contains("q")) throw SchemaError("missing field", "q");
    const Json& jd = j["directions"];
    if (!jd.is_array() || jd.empty()) throw SchemaError("expected a non-empty array of vectors", "directions");
    SetupFile s;
    for (std::size_t i = 0; i < jd.size(); ++i) {
        if (!jd[i].is_array()) throw SchemaError("expected an array of numbers", at("directions", i));
        s.directions.push_back(real_vector_from_json(jd[i], at("directions", i)));
    }
    s.q = integer(j["q"], "q");
    return s;
}

SetupFile load_setup(const std::string& path) {
    try {
        return setup_from_json(read_json_file(path));
    } catch (const SchemaError& e) {
        throw SchemaError(e.what(), path + ":" + e.context());
    }
}

SimulationFile simulation_from_json(const Json& j) {
    check_keys(j, {"dt", "t_max", "n_paths", "positivity_clip", "store_states", "checkpoints", "r", "rho0"}, "");
    SimulationFile s;
    if (j.contains("dt")) s.config.dt = number(j["dt"], "dt");
    if (j.contains("t_max")) s.config.t_max = number(j["t_max"], "t_max");
    if (j.contains("n_paths")) s.config.n_paths = integer(j["n_paths"], "n_paths");
    if (j.contains("positivity_clip")) s.config.positivity_clip = number(j["positivity_clip"], "positivity_clip");
    if (j.contains("store_states")) {
        if (!j["store_states"].is_boolean()) throw SchemaError("expected a boolean", "store_states");
        s.config.store_states = j["store_states"].get<bool>();
    }
    s.checkpoints = j.contains("checkpoints") ? doubles_from_json(j["checkpoints"], "checkpoints")
                                              : std::vector<double>{s.config.t_max};
    if (j.contains("r")) s.r = real_vector_from_json(j["r"], "r");
    if (j.contains("rho0")) s.rho0 = j["rho0"];
    return s;
}

SimulationFile load_simulation(const std::string& path) {
    try {
        return simulation_from_json(read_json_file(path));
    } catch (const SchemaError& e) {
        throw SchemaError(e.what(), path + ":" + e.context());
    }
}

DensityOperator initial_state(const Json& source, const GeneratorContext& ctx, const std::string& path) {
    if (source.is_string()) {
        const std::string s = source.get<std::string>();
        if (s == "stationary") return ctx.state;
        if (s == "maximally_mixed") return DensityOperator::maximally_mixed(ctx.dim());
        throw SchemaError("expected 'stationary', 'maximally_mixed' or a matrix", path);
    }
    Matrix m = matrix_from_json(source, path);
    if (m.rows() != ctx.dim() || m.cols() != ctx.dim()) throw DimensionMismatch("initial state size differs from the model", path);
    if (std::abs(m.trace() - cplx(1.0, 0.0)) > 1e-10) throw ValidationError("initial state must have unit trace", path);
    return DensityOperator(m);
}

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

std::string csv_escape(const std::string& f) {
    if (f.find_first_of(",\"\r\n") == std::string::npos) return f;
    std::string out = "\"";
    for (char c : f) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

void CsvTable::add_row(std::vector<std::string> row) {
    if (row.size() != header.size()) throw NumericalError("CSV row width differs from the header");
    rows.push_back(std::move(row));
}

std::size_t CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw SchemaError("missing CSV column", name);
}

std::string CsvTable::str() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out += ',';
            out += csv_escape(fields[i]);
        }
        out += "\r\n";
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out;
}

CsvTable parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> rec;
    std::string cur;
    bool quoted = false, field_started = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
            continue;
        }
        if (c == '"' && !field_started) {
            quoted = true;
            field_started = true;
        } else if (c == ',') {
            rec.push_back(std::move(cur));
            cur.clear();
            field_started = false;
        } else if (c == '\r' || c == '\n') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            rec.push_back(std::move(cur));
            cur.clear();
            field_started = false;
            records.push_back(std::move(rec));
            rec.clear();
        } else {
            cur += c;
            field_started = true;
        }
    }
    if (quoted) throw SchemaError("unterminated quoted CSV field", "csv");
    if (field_started || !rec.empty()) {
        rec.push_back(std::move(cur));
        records.push_back(std::move(rec));
    }
    if (records.empty()) throw SchemaError("CSV has no header row", "csv");
    CsvTable t(records.front());
    for (std::size_t i = 1; i < records.size(); ++i) {
        if (records[i].size() != t.header.size())
            throw SchemaError("CSV row width differs from the header", "csv row " + std::to_string(i));
        t.rows.push_back(std::move(records[i]));
    }
    return t;
}

CsvTable read_csv_file(const std::string& path) {
    try {
        return parse_csv(read_text_file(path));
    } catch (const SchemaError& e) {
        throw SchemaError(e.what(), path + ":" + e.context());
    }
}

std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw NumericalError("SHA-256 computation failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xf];
    }
    return out;
}

void RunManifest::add_input(const std::string& path) { inputs.push_back({path, sha256_hex(read_text_file(path))}); }

Json RunManifest::to_json() const {
    Json j = Json::object();
    j["tool_version"] = tool_version;
    j["command_line"] = command_line;
    Json in = Json::array();
    for (const InputDigest& d : inputs) in.push_back({{"path", d.path}, {"sha256", d.sha256}});
    j["inputs"] = std::move(in);
    j["base_seed"] = base_seed ? Json(*base_seed) : Json(nullptr);
    j["started_utc"] = started_utc;
    j["wall_seconds"] = wall_seconds;
    j["parameters"] = parameters;
    return j;
}

RunManifest RunManifest::from_json(const Json& j) {
    check_keys(j, {"tool_version", "command_line", "inputs", "base_seed", "started_utc", "wall_seconds", "parameters"}, "");
    RunManifest m;
    try {
        m.tool_version = j.at("tool_version").get<std::string>();
        m.command_line = j.at("command_line").get<std::vector<std::string>>();
        for (const Json& d : j.at("inputs")) m.inputs.push_back({d.at("path").get<std::string>(), d.at("sha256").get<std::string>()});
        if (j.contains("base_seed") && !j["base_seed"].is_null()) m.base_seed = j["base_seed"].get<std::uint64_t>();
        m.started_utc = j.value("started_utc", "");
        m.wall_seconds = j.value("wall_seconds", 0.0);
        m.parameters = j.value("parameters", Json::object());
    } catch (const Json::exception& e) {
        throw SchemaError(std::string("invalid manifest: ") + e.what(), "manifest");
    }
    return m;
}

void RunManifest::verify_inputs() const {
    for (const InputDigest& d : inputs)
        if (sha256_hex(read_text_file(d.path)) != d.sha256) throw ValidationError("input digest mismatch", d.path);
}

std::string manifest_path_for(const std::string& output_path) { return output_path + ".manifest.json"; }

}  // namespace qdev::io
