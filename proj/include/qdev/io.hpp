// io.hpp - JSON inputs, CSV outputs and run manifests.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "qdev/lindblad.hpp"
#include "qdev/trajectories.hpp"

namespace qdev::io {

using Json = nlohmann::ordered_json;

// Entries are numbers or [re, im] pairs; `path` names the field in error messages.
Matrix matrix_from_json(const Json& j, const std::string& path);
Json matrix_to_json(const Matrix& m);
RealVector real_vector_from_json(const Json& j, const std::string& path);
std::vector<double> doubles_from_json(const Json& j, const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
Json parse_json(const std::string& text, const std::string& what);
Json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const Json& j);

struct NamedObservable {
    std::string name;
    Matrix matrix;
};

struct ModelFile {
    std::string name;
    Lindbladian lindbladian;
    std::vector<NamedObservable> observables;
    Json parameters;
};

ModelFile model_from_json(const Json& j);
ModelFile load_model(const std::string& path);
Json model_to_json(const std::string& name, const Lindbladian& l, const Json& parameters,
                   const std::vector<NamedObservable>& observables = {});

struct SetupFile {
    std::vector<RealVector> directions;
    Index q = 0;
};

SetupFile setup_from_json(const Json& j);
SetupFile load_setup(const std::string& path);

struct SimulationFile {
    TrajectoryConfig config;  // base_seed and threads come from the command line
    std::vector<double> checkpoints;
    std::optional<RealVector> r;
    Json rho0 = "stationary";
};

SimulationFile simulation_from_json(const Json& j);
SimulationFile load_simulation(const std::string& path);

// "stationary", "maximally_mixed", or a matrix.
DensityOperator initial_state(const Json& source, const GeneratorContext& ctx, const std::string& path);

// Shortest decimal that round-trips; nan, inf and -inf spelled out.
std::string format_double(double x);
std::string csv_escape(const std::string& field);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    explicit CsvTable(std::vector<std::string> h = {}) : header(std::move(h)) {}
    void add_row(std::vector<std::string> row);
    // Index of a header column; throws SchemaError when absent.
    std::size_t column(const std::string& name) const;
    std::string str() const;
};

CsvTable parse_csv(const std::string& text);
CsvTable read_csv_file(const std::string& path);

std::string sha256_hex(const std::string& data);

struct InputDigest {
    std::string path;
    std::string sha256;
};

struct RunManifest {
    std::string tool_version;
    std::vector<std::string> command_line;
    std::vector<InputDigest> inputs;
    std::optional<std::uint64_t> base_seed;
    std::string started_utc;
    double wall_seconds = 0.0;
    Json parameters = Json::object();

    void add_input(const std::string& path);
    Json to_json() const;
    static RunManifest from_json(const Json& j);
    // Recomputes every input digest; throws ValidationError on a mismatch or missing file.
    void verify_inputs() const;
};

std::string manifest_path_for(const std::string& output_path);

}  // namespace qdev::io
