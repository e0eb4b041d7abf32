#include "qdev/cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <limits>
#include <ostream>

#include "qdev/acceptance.hpp"
#include "qdev/deviation.hpp"
#include "qdev/inequalities.hpp"
#include "qdev/io.hpp"
#include "qdev/models.hpp"
#include "qdev/trajectories.hpp"

#ifndef QDEV_VERSION
#define QDEV_VERSION "dev"
#endif

namespace qdev::cli {

namespace {

using io::Json;
using Clock = std::chrono::steady_clock;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Global {
    int threads = 1;
    std::string seed;
    std::string replay;
    std::string out;
    std::string json;
};

std::uint64_t parse_seed(const std::string& text, const std::string& context) {
    std::uint64_t v = 0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size())
        throw ValidationError("seed must be an unsigned 64-bit integer", context);
    return v;
}

std::string utc_now() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

Json numeric_or_string(const std::string& s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (!s.empty() && res.ec == std::errc() && res.ptr == s.data() + s.size() && std::isfinite(v)) return v;
    return s;
}

std::string status_of(const std::vector<double>& values) {
    for (double v : values)
        if (std::isnan(v)) return "failed";
    return "ok";
}

std::vector<std::string> indexed(const std::string& stem, Index n) {
    std::vector<std::string> out;
    for (Index i = 0; i < n; ++i) out.push_back(stem + "_" + std::to_string(i));
    return out;
}

class Run {
public:
    Run(std::vector<std::string> args, Global g, std::ostream& out) : g_(std::move(g)), out_(out), start_(Clock::now()) {
        manifest.tool_version = QDEV_VERSION;
        manifest.command_line = std::move(args);
        manifest.started_utc = utc_now();
        manifest.parameters["threads"] = g_.threads;
        if (!g_.seed.empty()) {
            manifest.base_seed = parse_seed(g_.seed, "--seed");
        } else if (const char* env = std::getenv("QDEV_SEED")) {
            manifest.base_seed = parse_seed(env, "QDEV_SEED");
        }
    }

    const Global& global() const { return g_; }
    std::optional<std::uint64_t> seed() const { return manifest.base_seed; }

    void input(const std::string& path) { manifest.add_input(path); }

    // Inline JSON, or @file to read it from disk.
    Json json_arg(const std::string& value, const std::string& what) {
        if (!value.empty() && value[0] == '@') {
            const std::string path = value.substr(1);
            input(path);
            return io::read_json_file(path);
        }
        return io::parse_json(value, what);
    }

    io::ModelFile model(const std::string& path) {
        input(path);
        return io::load_model(path);
    }

    void emit(const io::CsvTable& table, const Json& extra = Json::object()) {
        manifest.wall_seconds = std::chrono::duration<double>(Clock::now() - start_).count();
        if (g_.out.empty()) {
            out_ << table.str();
        } else {
            io::write_text_file(g_.out, table.str());
            io::write_json_file(io::manifest_path_for(g_.out), manifest.to_json());
        }
        if (!g_.json.empty()) {
            Json j = Json::object();
            j["columns"] = table.header;
            Json rows = Json::array();
            for (const auto& r : table.rows) {
                Json row = Json::object();
                for (std::size_t i = 0; i < r.size(); ++i) row[table.header[i]] = numeric_or_string(r[i]);
                rows.push_back(std::move(row));
            }
            j["rows"] = std::move(rows);
            for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
            j["manifest"] = manifest.to_json();
            io::write_json_file(g_.json, j);
        }
    }

    void emit_json_document(const Json& doc) {
        if (g_.out.empty()) throw UsageError("--out is required", "--out");
        manifest.wall_seconds = std::chrono::duration<double>(Clock::now() - start_).count();
        io::write_json_file(g_.out, doc);
        io::write_json_file(io::manifest_path_for(g_.out), manifest.to_json());
    }

    io::RunManifest manifest;

private:
    Global g_;
    std::ostream& out_;
    Clock::time_point start_;
};

// ---- model new ----

struct ModelArgs {
    std::string templ;
    Index dim = 2;
    std::string sigma;
    std::string rates;
    double dephasing = -1.0;
    int factors = 2;
    int sites = 2;
    double beta = 0.5;
    double coupling = 1.0;
    double field = 0.0;
    std::string which = "psi";
    double theta_u = 0.1, phi_1 = 0.6, phi_2 = 1.2, p = 0.3;
};

FaithfulState sigma_from_args(Run& run, const ModelArgs& a, Index d) {
    if (a.sigma.empty()) return FaithfulState(DensityOperator::maximally_mixed(d));
    RealVector s = io::real_vector_from_json(run.json_arg(a.sigma, "--sigma"), "--sigma");
    if (s.size() != d) throw DimensionMismatch("--sigma needs one eigenvalue per level", "--sigma");
    return FaithfulState(Matrix(s.cast<cplx>().asDiagonal()));
}

int cmd_model_new(Run& run, const ModelArgs& a) {
    Json params = Json::object();
    params["template"] = a.templ;
    std::optional<Lindbladian> l;
    if (a.templ == "depolarizing") {
        if (a.dim < 1) throw ValidationError("dim must be positive", "--dim");
        FaithfulState s = sigma_from_args(run, a, a.dim);
        l.emplace(models::depolarizing(s));
        params["dim"] = a.dim;
        params["sigma_eigenvalues"] = std::vector<double>(s.eigenvalues().data(), s.eigenvalues().data() + s.dim());
    } else if (a.templ == "classical") {
        if (a.rates.empty()) throw UsageError("classical template needs --rates", "--rates");
        Matrix q = io::matrix_from_json(run.json_arg(a.rates, "--rates"), "--rates");
        if (q.imag().cwiseAbs().maxCoeff() > 0.0) throw ValidationError("rates must be real", "--rates");
        l.emplace(models::classical_embedding(models::ClassicalChain(q.real()), a.dephasing));
        params["rates"] = run.json_arg(a.rates, "--rates");
        params["dephasing"] = a.dephasing;
    } else if (a.templ == "tensor") {
        if (a.factors < 1) throw ValidationError("factors must be positive", "--factors");
        FaithfulState s = sigma_from_args(run, a, a.dim);
        std::vector<Lindbladian> fs(static_cast<std::size_t>(a.factors), models::depolarizing(s));
        l.emplace(models::tensor_product(fs));
        params["factors"] = a.factors;
        params["dim"] = a.dim;
    } else if (a.templ == "heat-bath") {
        if (a.sites < 1) throw ValidationError("sites must be positive", "--sites");
        models::CommutingHamiltonian h;
        h.n_sites = a.sites;
        h.local_dim = 2;
        h.beta = a.beta;
        const Matrix z = (Matrix(2, 2) << 1.0, 0.0, 0.0, -1.0).finished();
        for (int i = 0; i + 1 < a.sites; ++i)
            if (a.coupling != 0.0) h.terms.push_back({{i, i + 1}, a.coupling * kron(z, z)});
        for (int i = 0; i < a.sites; ++i)
            if (a.field != 0.0) h.terms.push_back({{i}, a.field * z});
        l.emplace(models::heat_bath(h).generator);
        params["sites"] = a.sites;
        params["beta"] = a.beta;
        params["coupling"] = a.coupling;
        params["field"] = a.field;
    } else if (a.templ == "appendix-b") {
        models::AppendixBParams p{a.theta_u, a.phi_1, a.phi_2, a.p};
        models::AppendixB fx = models::appendix_b_fixtures(p);
        const SuperOperator* ch = nullptr;
        if (a.which == "psi") ch = &fx.psi;
        else if (a.which == "psi_tilde") ch = &fx.psi_tilde;
        else if (a.which == "phi") ch = &fx.phi;
        else if (a.which == "p_channel") ch = &fx.p_channel;
        else throw ValidationError("--which must be psi, psi_tilde, phi or p_channel", "--which");
        l.emplace(models::channel_generator(*ch));
        params["which"] = a.which;
        params["theta_u"] = a.theta_u;
        params["phi_1"] = a.phi_1;
        params["phi_2"] = a.phi_2;
        params["p"] = a.p;
    } else {
        throw ValidationError("unknown template '" + a.templ + "'", "template");
    }
    run.manifest.parameters["model"] = params;
    run.emit_json_document(io::model_to_json(a.templ, *l, params));
    return 0;
}

// ---- bound ----

struct BoundArgs {
    std::string model, setup, r, t = "[1]", rho0 = "stationary";
};

Json rho0_source(Run& run, const std::string& v) {
    if (v == "stationary" || v == "maximally_mixed") return v;
    return run.json_arg("@" + v, "--rho0");
}

MeasurementSetup make_setup(Run& run, const io::ModelFile& m, const std::string& setup_path) {
    run.input(setup_path);
    io::SetupFile s = io::load_setup(setup_path);
    return MeasurementSetup(stationary_state(m.lindbladian), s.directions, s.q);
}

int cmd_bound(Run& run, const BoundArgs& a) {
    io::ModelFile m = run.model(a.model);
    MeasurementSetup setup = make_setup(run, m, a.setup);
    const RealVector r = io::real_vector_from_json(run.json_arg(a.r, "--r"), "r");
    const std::vector<double> ts = io::doubles_from_json(run.json_arg(a.t, "--t"), "t");
    for (std::size_t i = 0; i < ts.size(); ++i)
        if (!(ts[i] >= 0.0) || !std::isfinite(ts[i]))
            throw ValidationError("t must be finite and nonnegative", "t[" + std::to_string(i) + "]");
    DensityOperator rho = io::initial_state(rho0_source(run, a.rho0), setup.context(), "rho0");

    const Index l = setup.num_channels();
    std::vector<std::string> header = {"t"};
    for (auto& h : indexed("r", l)) header.push_back(h);
    for (auto h : {"exponent", "prefactor", "bound"}) header.push_back(h);
    for (auto& h : indexed("lambda", l)) header.push_back(h);
    header.push_back("status");
    io::CsvTable table(header);

    BoundReport rep;
    std::string failure;
    try {
        rep = main_bound(setup, rho, r);
    } catch (const NumericalError& e) {
        failure = e.what();
        rep.r = r;
        rep.exponent = kNaN;
        rep.prefactor = bound_prefactor(setup.sigma(), rho);
        rep.lambda_star = RealVector::Constant(l, kNaN);
    }
    for (double t : ts) {
        const double b = failure.empty() ? rep.bound(t) : kNaN;
        std::vector<std::string> row = {io::format_double(t)};
        for (Index j = 0; j < l; ++j) row.push_back(io::format_double(r(j)));
        row.push_back(io::format_double(rep.exponent));
        row.push_back(io::format_double(rep.prefactor));
        row.push_back(io::format_double(b));
        for (Index j = 0; j < l; ++j) row.push_back(io::format_double(rep.lambda_star(j)));
        row.push_back(status_of({rep.exponent, b}));
        table.add_row(std::move(row));
    }
    Json extra = {{"mean", std::vector<double>(rep.mean.data(), rep.mean.data() + rep.mean.size())},
                  {"converged", rep.converged},
                  {"stationarity_residual", rep.stationarity_residual}};
    run.emit(table, extra);
    if (!failure.empty()) throw NumericalError(failure, "main_bound");
    return 0;
}

// ---- rate ----

struct RateArgs {
    std::string model, setup, grid;
    double from = 0.0, to = 1.0;
    int points = 0;
};

int cmd_rate(Run& run, const RateArgs& a) {
    io::ModelFile m = run.model(a.model);
    MeasurementSetup setup = make_setup(run, m, a.setup);
    const Index l = setup.num_channels();
    std::vector<RealVector> grid;
    if (!a.grid.empty()) {
        Json g = run.json_arg(a.grid, "--grid");
        if (!g.is_array()) throw SchemaError("expected an array", "grid");
        for (std::size_t i = 0; i < g.size(); ++i) {
            const std::string p = "grid[" + std::to_string(i) + "]";
            RealVector s = io::real_vector_from_json(g[i], p);
            if (s.size() != l) throw DimensionMismatch("grid point length must equal the number of channels", p);
            grid.push_back(s);
        }
    } else if (a.points > 0) {
        if (l != 1) throw UsageError("--from/--to/--points needs a single channel; use --grid", "--grid");
        for (int i = 0; i < a.points; ++i) {
            const double s = a.points == 1 ? a.from : a.from + (a.to - a.from) * i / (a.points - 1);
            grid.push_back(RealVector::Constant(1, s));
        }
    } else {
        throw UsageError("rate needs --grid or --points", "--grid");
    }
    RateTable rt = rate_function(setup, grid, run.global().threads);

    std::vector<std::string> header = indexed("s", l);
    header.push_back("rate");
    header.push_back("unbounded");
    for (auto& h : indexed("lambda", l)) header.push_back(h);
    header.push_back("status");
    io::CsvTable table(header);
    for (const RatePoint& p : rt.points) {
        std::vector<std::string> row;
        for (Index j = 0; j < l; ++j) row.push_back(io::format_double(p.s(j)));
        row.push_back(io::format_double(p.value));
        row.push_back(p.unbounded ? "true" : "false");
        for (Index j = 0; j < l; ++j) row.push_back(io::format_double(p.lambda.size() == l ? p.lambda(j) : kNaN));
        row.push_back(status_of({p.value}));
        table.add_row(std::move(row));
    }
    run.emit(table, {{"convex", rt.convex}});
    return 0;
}

// ---- simulate ----

struct SimulateArgs {
    std::string model, setup, config, paths_out;
};

int cmd_simulate(Run& run, const SimulateArgs& a, std::ostream& err) {
    if (!run.seed()) throw ValidationError("simulate requires --seed or QDEV_SEED", "seed");
    io::ModelFile m = run.model(a.model);
    MeasurementSetup setup = make_setup(run, m, a.setup);
    run.input(a.config);
    io::SimulationFile sim = io::load_simulation(a.config);
    sim.config.base_seed = *run.seed();
    sim.config.threads = run.global().threads;
    const Index l = setup.num_channels();
    RealVector r = sim.r ? *sim.r : RealVector::Constant(l, -std::numeric_limits<double>::infinity());
    if (r.size() != l) throw DimensionMismatch("r must have one entry per channel", "r");
    DensityOperator rho0 = io::initial_state(sim.rho0, setup.context(), "rho0");

    EnsembleResult e = run_ensemble(setup, rho0, sim.config, r, sim.checkpoints);
    for (const std::string& w : e.warnings) err << "warning: " << w << "\n";

    std::vector<std::string> header = {"t"};
    for (auto& h : indexed("mean", l)) header.push_back(h);
    for (auto& h : indexed("stderr", l)) header.push_back(h);
    for (auto& h : indexed("r", l)) header.push_back(h);
    for (auto h : {"exceedances", "n_paths", "tail_estimate", "ci_lower", "ci_upper"}) header.push_back(h);
    if (sim.config.store_states) {
        header.push_back("mean_state_distance");
        header.push_back("mean_state_tolerance");
    }
    header.push_back("status");
    io::CsvTable table(header);
    for (const CheckpointSummary& c : e.checkpoints) {
        std::vector<double> nums;
        std::vector<std::string> row = {io::format_double(c.t)};
        for (Index j = 0; j < l; ++j) row.push_back(io::format_double(c.estimator_mean(j))), nums.push_back(c.estimator_mean(j));
        for (Index j = 0; j < l; ++j) row.push_back(io::format_double(c.estimator_stderr(j)));
        for (Index j = 0; j < l; ++j) row.push_back(io::format_double(r(j)));
        row.push_back(std::to_string(c.tail.exceedances));
        row.push_back(std::to_string(c.tail.n_paths));
        row.push_back(io::format_double(c.tail.estimate));
        row.push_back(io::format_double(c.tail.ci.lower));
        row.push_back(io::format_double(c.tail.ci.upper));
        if (sim.config.store_states) {
            MeanStateCheck chk = check_mean_state(setup.context(), rho0, c);
            row.push_back(io::format_double(chk.distance));
            row.push_back(io::format_double(chk.tolerance));
        }
        row.push_back(status_of(nums));
        table.add_row(std::move(row));
    }

    if (!a.paths_out.empty()) {
        std::vector<std::string> ph = {"path", "t"};
        for (auto& h : indexed("estimator", l)) ph.push_back(h);
        ph.push_back("attempts");
        io::CsvTable paths(ph);
        for (std::size_t p = 0; p < e.paths.size(); ++p) {
            const PathRecord& rec = e.paths[p];
            for (std::size_t c = 0; c < sim.checkpoints.size(); ++c) {
                std::vector<std::string> row = {std::to_string(p), io::format_double(e.checkpoints[c].t)};
                for (Index j = 0; j < l; ++j) row.push_back(io::format_double(rec.estimators[c](j)));
                row.push_back(std::to_string(rec.attempts));
                paths.add_row(std::move(row));
            }
        }
        io::write_text_file(a.paths_out, paths.str());
        io::write_json_file(io::manifest_path_for(a.paths_out), run.manifest.to_json());
    }

    Json extra = {{"valid_fraction", e.valid_fraction()},
                  {"resampled_paths", e.resampled_paths},
                  {"invalid_steps", e.invalid_steps},
                  {"total_steps", e.total_steps},
                  {"warnings", e.warnings}};
    run.manifest.parameters["valid_fraction"] = e.valid_fraction();
    run.emit(table, extra);
    return 0;
}

// ---- compare ----

struct CompareArgs {
    std::string simulate, bound;
};

std::vector<std::size_t> r_columns(const io::CsvTable& t) {
    std::vector<std::size_t> out;
    for (Index j = 0;; ++j) {
        const std::string name = "r_" + std::to_string(j);
        bool found = false;
        for (std::size_t i = 0; i < t.header.size(); ++i)
            if (t.header[i] == name) out.push_back(i), found = true;
        if (!found) break;
    }
    return out;
}

double cell(const io::CsvTable& t, std::size_t row, std::size_t col, const std::string& file) {
    const std::string& s = t.rows[row][col];
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return kNaN;
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw SchemaError("expected a number", file + ": row " + std::to_string(row + 1) + ", column " + t.header[col]);
    return v;
}

int cmd_compare(Run& run, const CompareArgs& a) {
    run.input(a.simulate);
    run.input(a.bound);
    io::CsvTable sim = io::read_csv_file(a.simulate);
    io::CsvTable bnd = io::read_csv_file(a.bound);
    const auto rs = r_columns(sim), rb = r_columns(bnd);
    if (rs.empty() || rs.size() != rb.size()) throw SchemaError("r columns differ between the two files", "r_0");
    const std::size_t st = sim.column("t"), bt = bnd.column("t");
    const std::size_t lo = sim.column("ci_lower"), hi = sim.column("ci_upper"), est = sim.column("tail_estimate");
    const std::size_t be = bnd.column("exponent"), bp = bnd.column("prefactor");

    std::vector<std::string> header = {"t"};
    for (auto& h : indexed("r", static_cast<Index>(rs.size()))) header.push_back(h);
    for (auto h : {"tail_estimate", "ci_lower", "ci_upper", "bound", "margin", "consistent", "status"}) header.push_back(h);
    io::CsvTable out(header);
    for (std::size_t i = 0; i < sim.rows.size(); ++i) {
        const double t = cell(sim, i, st, a.simulate);
        std::optional<std::size_t> match;
        for (std::size_t k = 0; k < bnd.rows.size() && !match; ++k) {
            bool same = cell(bnd, k, bt, a.bound) == t;
            for (std::size_t j = 0; j < rs.size() && same; ++j) same = cell(bnd, k, rb[j], a.bound) == cell(sim, i, rs[j], a.simulate);
            if (same) match = k;
        }
        std::vector<std::string> row = {sim.rows[i][st]};
        for (std::size_t j : rs) row.push_back(sim.rows[i][j]);
        row.push_back(sim.rows[i][est]);
        row.push_back(sim.rows[i][lo]);
        row.push_back(sim.rows[i][hi]);
        if (!match) {
            for (auto v : {"nan", "nan", "false", "unmatched"}) row.push_back(v);
        } else {
            EmpiricalTail tail;
            tail.estimate = cell(sim, i, est, a.simulate);
            tail.ci.lower = cell(sim, i, lo, a.simulate);
            tail.ci.upper = cell(sim, i, hi, a.simulate);
            BoundReport rep;
            rep.exponent = cell(bnd, *match, be, a.bound);
            rep.prefactor = cell(bnd, *match, bp, a.bound);
            if (std::isnan(rep.exponent) || std::isnan(tail.estimate)) {
                for (auto v : {"nan", "nan", "false", "failed"}) row.push_back(v);
            } else {
                Comparison c = compare_with_bound(tail, rep, t);
                row.push_back(io::format_double(c.bound));
                row.push_back(io::format_double(c.margin));
                row.push_back(c.consistent ? "true" : "false");
                row.push_back("ok");
            }
        }
        out.add_row(std::move(row));
    }
    run.emit(out);
    return 0;
}

// ---- inequalities ----

struct InequalityArgs {
    std::string model;
    std::optional<double> alpha2, ti;
};

int cmd_inequalities(Run& run, const InequalityArgs& a) {
    io::ModelFile m = run.model(a.model);
    GeneratorContext ctx = stationary_state(m.lindbladian);
    io::CsvTable table({"quantity", "value", "detail"});
    table.add_row({"dim", std::to_string(ctx.dim()), ""});
    table.add_row({"primitive", ctx.primitive ? "true" : "false", "kernel_dim=" + std::to_string(ctx.kernel_dim)});
    Json extra = Json::object();
    for (InnerProductKind k : {InnerProductKind::KMS, InnerProductKind::GNS, InnerProductKind::BKM}) {
        DetailedBalance db = check_detailed_balance(k, ctx);
        table.add_row({std::string("symmetry_") + to_string(k), io::format_double(db.deviation),
                       db.symmetric ? "symmetric" : "asymmetric"});
        extra["symmetry"][to_string(k)] = db.symmetric;
    }
    FunctionalConstants fc = functional_constants(ctx, a.alpha2, a.ti);
    table.add_row({"spectral_gap", io::format_double(fc.spectral_gap), to_string(fc.gap_provenance)});
    table.add_row({"lsi_alpha2", io::format_double(fc.lsi_alpha2.value_or(kNaN)),
                   fc.lsi_alpha2 ? to_string(fc.alpha2_provenance) : "unavailable"});
    table.add_row({"ti_constant", io::format_double(fc.ti_constant.value_or(kNaN)),
                   fc.ti_constant ? to_string(fc.ti_provenance) : "unavailable"});
    std::optional<LipschitzContext> lip;
    std::string lip_error;
    try {
        lip.emplace(ctx);
    } catch (const ValidationError& e) {
        lip_error = e.what();
    }
    for (const io::NamedObservable& o : m.observables) {
        if (lip) table.add_row({"lipschitz:" + o.name, io::format_double(lipschitz_norm(*lip, o.matrix)), ""});
        else table.add_row({"lipschitz:" + o.name, "nan", "bohr_frequencies_absent"});
    }
    run.emit(table, extra);
    return 0;
}

// ---- concentrate ----

struct ConcentrateArgs {
    std::string variant, inputs = "{}", t = "[1]", r = "[1]";
};

ConcentrationInputs concentration_inputs(const Json& j) {
    static const char* keys[] = {"prefactor", "ti_constant", "lipschitz", "sup_norm", "gap", "dim", "pair_sum",
                                 "alpha2", "alpha_u", "n_factors", "beta", "hamiltonian_norm", "ornstein_lipschitz"};
    if (!j.is_object()) throw SchemaError("expected an object", "inputs");
    ConcentrationInputs in;
    std::optional<double>* slots[] = {&in.prefactor, &in.ti_constant, &in.lipschitz, &in.sup_norm, &in.gap,
                                      &in.dim, &in.pair_sum, &in.alpha2, &in.alpha_u, &in.n_factors,
                                      &in.beta, &in.hamiltonian_norm, &in.ornstein_lipschitz};
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        if (k == "ti_hypothesis_attested") {
            if (!it.value().is_boolean()) throw SchemaError("expected a boolean", "inputs." + k);
            in.ti_hypothesis_attested = it.value().get<bool>();
            continue;
        }
        bool known = false;
        for (std::size_t i = 0; i < std::size(keys); ++i)
            if (k == keys[i]) {
                if (!it.value().is_number()) throw SchemaError("expected a number", "inputs." + k);
                *slots[i] = it.value().get<double>();
                known = true;
            }
        if (!known) throw SchemaError("unknown field '" + k + "'", "inputs." + k);
    }
    return in;
}

int cmd_concentrate(Run& run, const ConcentrateArgs& a) {
    ConcentrationBound b =
        concentration_bound(concentration_variant_from_string(a.variant), concentration_inputs(run.json_arg(a.inputs, "--inputs")));
    const std::vector<double> ts = io::doubles_from_json(run.json_arg(a.t, "--t"), "t");
    const std::vector<double> rs = io::doubles_from_json(run.json_arg(a.r, "--r"), "r");
    io::CsvTable table({"t", "r", "exponent", "prefactor", "bound", "status"});
    for (double t : ts)
        for (double r : rs) {
            const double e = b.exponent(t, r), v = b.bound(t, r);
            table.add_row({io::format_double(t), io::format_double(r), io::format_double(e), io::format_double(b.prefactor),
                           io::format_double(v), status_of({e, v})});
        }
    run.manifest.parameters["variant"] = a.variant;
    run.emit(table, {{"variant", a.variant}, {"kappa", b.kappa}});
    return 0;
}

// ---- check ----

int cmd_check(Run& run, const std::string& suite, std::ostream& out) {
    if (suite != "paper-fixtures") throw ValidationError("unknown suite '" + suite + "'", "--suite");
    acceptance::Options opts;
    opts.threads = run.global().threads;
    bool all = true;
    acceptance::run_all(opts, [&](const acceptance::CriterionResult& r) {
        out << acceptance::format_line(r) << "\n" << std::flush;
        all = all && r.pass;
    });
    if (!all) throw NumericalError("one or more acceptance criteria failed", "check");
    return 0;
}

void write_error(std::ostream& err, const std::string& code, const std::string& message, const std::string& context) {
    Json j = Json::object();
    j["code"] = code;
    j["message"] = message;
    j["context"] = context;
    err << j.dump() << "\n";
}

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, int depth) {
    CLI::App app{"qdev: deviation bounds and trajectory simulation for monitored quantum Markov semigroups"};
    app.fallthrough();
    app.require_subcommand(0, 1);
    app.set_version_flag("--version", std::string(QDEV_VERSION));
    Global g;
    app.add_option("--threads", g.threads, "worker threads for ensembles and rate grids")->check(CLI::PositiveNumber);
    app.add_option("--seed", g.seed, "base seed (overrides QDEV_SEED)");
    app.add_option("--out", g.out, "output file (CSV, or JSON for model new); stdout when omitted");
    app.add_option("--json", g.json, "also write a JSON report with the run manifest");
    app.add_option("--replay", g.replay, "re-run the command recorded in a manifest");

    auto* model = app.add_subcommand("model", "model files");
    model->require_subcommand(1);
    ModelArgs ma;
    auto* mnew = model->add_subcommand("new", "write a model JSON from a named template");
    mnew->add_option("template", ma.templ, "depolarizing | classical | tensor | heat-bath | appendix-b")->required();
    mnew->add_option("--dim", ma.dim, "local dimension");
    mnew->add_option("--sigma", ma.sigma, "stationary eigenvalues as a JSON list");
    mnew->add_option("--rates", ma.rates, "classical rate matrix as JSON");
    mnew->add_option("--dephasing", ma.dephasing, "classical dephasing rate; negative picks the default");
    mnew->add_option("--factors", ma.factors, "number of tensor factors");
    mnew->add_option("--sites", ma.sites, "heat-bath chain length");
    mnew->add_option("--beta", ma.beta, "inverse temperature");
    mnew->add_option("--coupling", ma.coupling, "ZZ coupling");
    mnew->add_option("--field", ma.field, "Z field");
    mnew->add_option("--which", ma.which, "appendix-b channel: psi | psi_tilde | phi | p_channel");
    mnew->add_option("--theta-u", ma.theta_u);
    mnew->add_option("--phi1", ma.phi_1);
    mnew->add_option("--phi2", ma.phi_2);
    mnew->add_option("--p", ma.p);

    BoundArgs ba;
    auto* bound = app.add_subcommand("bound", "finite-time deviation bound");
    bound->add_option("--model", ba.model)->required();
    bound->add_option("--setup", ba.setup)->required();
    bound->add_option("--r", ba.r, "thresholds as a JSON list")->required();
    bound->add_option("--t", ba.t, "times as a JSON list");
    bound->add_option("--rho0", ba.rho0, "stationary | maximally_mixed | path to a JSON matrix");

    RateArgs ra;
    auto* rate = app.add_subcommand("rate", "large-deviation rate function on a grid");
    rate->add_option("--model", ra.model)->required();
    rate->add_option("--setup", ra.setup)->required();
    rate->add_option("--grid", ra.grid, "JSON list of points");
    rate->add_option("--from", ra.from);
    rate->add_option("--to", ra.to);
    rate->add_option("--points", ra.points);

    SimulateArgs sa;
    auto* simulate = app.add_subcommand("simulate", "quantum-trajectory ensemble");
    simulate->add_option("--model", sa.model)->required();
    simulate->add_option("--setup", sa.setup)->required();
    simulate->add_option("--config", sa.config)->required();
    simulate->add_option("--paths-out", sa.paths_out, "per-path estimator dump");

    CompareArgs ca;
    auto* compare = app.add_subcommand("compare", "join simulate and bound CSVs");
    compare->add_option("--simulate", ca.simulate)->required();
    compare->add_option("--bound", ca.bound)->required();

    InequalityArgs ia;
    auto* ineq = app.add_subcommand("inequalities", "functional-inequality report");
    ineq->add_option("--model", ia.model)->required();
    double alpha2 = 0.0, ti = 0.0;
    auto* alpha2_opt = ineq->add_option("--alpha2", alpha2, "user-supplied LSI constant");
    auto* ti_opt = ineq->add_option("--ti-constant", ti, "user-supplied transport-information constant");

    ConcentrateArgs co;
    auto* conc = app.add_subcommand("concentrate", "closed-form concentration bounds");
    conc->add_option("--variant", co.variant)->required();
    conc->add_option("--inputs", co.inputs, "JSON object or @file");
    conc->add_option("--t", co.t);
    conc->add_option("--r", co.r);

    std::string suite;
    auto* check = app.add_subcommand("check", "run the acceptance fixtures");
    check->add_option("--suite", suite)->required();

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(std::move(rev));
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        throw UsageError(e.what(), "argv");
    }

    if (!g.replay.empty()) {
        if (depth > 0) throw UsageError("nested --replay", "--replay");
        io::RunManifest m = io::RunManifest::from_json(io::read_json_file(g.replay));
        m.verify_inputs();
        std::vector<std::string> again = m.command_line;
        bool has_seed = false;
        for (const auto& s : again) has_seed = has_seed || s == "--seed" || s.rfind("--seed=", 0) == 0;
        if (m.base_seed && !has_seed) {
            again.push_back("--seed");
            again.push_back(std::to_string(*m.base_seed));
        }
        return run_command(again, out, err, depth + 1);
    }

    Run run(args, g, out);
    if (mnew->parsed()) return cmd_model_new(run, ma);
    if (bound->parsed()) return cmd_bound(run, ba);
    if (rate->parsed()) return cmd_rate(run, ra);
    if (simulate->parsed()) return cmd_simulate(run, sa, err);
    if (compare->parsed()) return cmd_compare(run, ca);
    if (ineq->parsed()) {
        if (alpha2_opt->count() > 0) ia.alpha2 = alpha2;
        if (ti_opt->count() > 0) ia.ti = ti;
        return cmd_inequalities(run, ia);
    }
    if (conc->parsed()) return cmd_concentrate(run, co);
    if (check->parsed()) return cmd_check(run, suite, out);
    throw UsageError("expected a verb: model, bound, rate, simulate, compare, inequalities, concentrate or check", "verb");
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    try {
        return run_command(args, out, err, 0);
    } catch (const Error& e) {
        write_error(err, e.code(), e.what(), e.context());
        return e.kind() == ErrorKind::validation ? 1 : 2;
    } catch (const io::Json::exception& e) {
        write_error(err, "schema_violation", e.what(), "");
        return 1;
    } catch (const std::exception& e) {
        write_error(err, "internal_error", e.what(), "");
        return 2;
    }
}

}  // namespace qdev::cli
