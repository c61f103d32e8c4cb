#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rydmap/enumeration.hpp"
#include "rydmap/fitting.hpp"
#include "rydmap/lattice.hpp"
#include "rydmap/rescaling.hpp"
#include "rydmap/sampling.hpp"
#include "rydmap/schedule.hpp"
#include "rydmap/symmetry.hpp"
#include "rydmap/text_io.hpp"

namespace rydmap::cli {

namespace {

using nlohmann::json;

struct ValidationFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- helpers

void emit(const std::string& path, std::ostream& out, const std::function<void(std::ostream&)>& write) {
    if (path.empty() || path == "-") {
        write(out);
        return;
    }
    std::ofstream file(path);
    if (!file) throw std::runtime_error("cannot open '" + path + "' for writing");
    write(file);
    if (!file) throw std::runtime_error("failed writing '" + path + "'");
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    return in;
}

std::string slurp(const std::string& path) {
    auto in = open_input(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void emit_json(const std::string& path, std::ostream& out, const json& doc) {
    emit(path, out, [&](std::ostream& os) { os << doc.dump(2) << '\n'; });
}

/// "lo:hi:n" (inclusive, evenly spaced) or a comma-separated list.
std::vector<double> parse_grid(const std::string& text) {
    if (text.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(text);
        std::string part;
        while (std::getline(ss, part, ':')) parts.push_back(part);
        if (parts.size() != 3) throw std::invalid_argument("grid must look like lo:hi:n");
        const auto n = text::parse_int(parts[2], "grid size");
        if (n < 1) throw std::invalid_argument("grid must have at least one point");
        return linear_grid(text::parse_double(parts[0], "grid start"), text::parse_double(parts[1], "grid end"),
                           static_cast<std::size_t>(n));
    }
    std::vector<double> values;
    for (const auto& f : text::split_csv(text)) values.push_back(text::parse_double(f, "grid value"));
    if (values.empty()) throw std::invalid_argument("grid is empty");
    return values;
}

SignConvention parse_sign(const std::string& s) {
    if (s == "drive") return SignConvention::drive;
    if (s == "printed") return SignConvention::printed;
    throw std::invalid_argument("sign convention must be drive or printed");
}

json stats_json(const BoltzmannStats& st, bool with_ground_state) {
    json j = {{"mean_concentration", st.mean_concentration},
              {"concentration_pmf", st.concentration_pmf},
              {"log_z", st.log_z},
              {"ground_energy_ev", st.ground_energy_ev}};
    if (with_ground_state) j["ground_state"] = st.ground_state.to_bitstring();
    return j;
}

void write_histogram_csv(std::ostream& os, const EnergyHistogram& h) {
    os << "bin_lo_ev,bin_hi_ev,count,mass\n";
    for (std::size_t b = 0; b < h.mass.size(); ++b) {
        os << text::format_double(h.edges_ev[b]) << ',' << text::format_double(h.edges_ev[b + 1]) << ','
           << text::format_double(h.count[b]) << ',' << text::format_double(h.mass[b]) << '\n';
    }
}

// ---------------------------------------------------------------- shared options

struct Geometry {
    std::string lattice = "flake28";
    double r_nn_um = 4.0;
    std::string area = "standard";
    std::string rows = "tight";
    std::string sign = "drive";
    unsigned threads = 0;

    void add(CLI::App* app) {
        app->add_option("--lattice", lattice, "flake28 | flake78 | hexagon | RxC | supercell:AxB")->capture_default_str();
        app->add_option("--r-nn-um", r_nn_um, "Device nearest-neighbour spacing (um)")->capture_default_str();
        app->add_option("--area", area, "Device area: standard | tall")->capture_default_str();
        app->add_option("--rows", rows, "Row spacing limit: standard | tight")->capture_default_str();
        app->add_option("--sign-convention", sign, "Detuning sign: drive | printed")->capture_default_str();
        app->add_option("--threads", threads, "Worker threads (0 = all cores)");
    }

    Lattice build_lattice() const { return parse_lattice(lattice); }

    HardwareSpec spec() const {
        AreaMode a;
        if (area == "standard") {
            a = AreaMode::standard;
        } else if (area == "tall") {
            a = AreaMode::tall;
        } else {
            throw std::invalid_argument("area must be standard or tall");
        }
        RowMode r;
        if (rows == "standard") {
            r = RowMode::standard;
        } else if (rows == "tight") {
            r = RowMode::tight;
        } else {
            throw std::invalid_argument("rows must be standard or tight");
        }
        return HardwareSpec::with_geometry(a, r);
    }

    SignConvention sign_convention() const { return parse_sign(sign); }
    EngineOptions engine() const { return {threads, 64}; }
};

struct ModelSource {
    double v_ev = 3.613e-4;
    double v_nn_ev = 0.0;
    double r_nn_model_um = 1.6122;
    std::string fit_json;
    std::string range = "four-shells";
    CLI::Option* v_opt = nullptr;
    CLI::Option* v_nn_opt = nullptr;
    CLI::Option* r_opt = nullptr;

    void add(CLI::App* app) {
        v_opt = app->add_option("--v-ev", v_ev, "On-site energy V (eV)")->capture_default_str();
        v_nn_opt = app->add_option("--v-nn-ev", v_nn_ev, "Nearest-neighbour pair strength (eV)");
        r_opt = app->add_option("--r-nn-model-um", r_nn_model_um, "Model nearest-neighbour distance (um)")
                    ->capture_default_str();
        app->add_option("--fit", fit_json, "Model from a fit JSON produced by `fit`");
        app->add_option("--range", range, "Material pair range: four-shells | untruncated")->capture_default_str();
    }

    EnergyModel build(const HardwareSpec& spec) const {
        PairRange pr;
        if (range == "four-shells") {
            pr = PairRange::four_shells;
        } else if (range == "untruncated") {
            pr = PairRange::untruncated;
        } else {
            throw std::invalid_argument("range must be four-shells or untruncated");
        }
        const double c6 = spec.c6_ev_um6();
        if (!fit_json.empty()) {
            if (v_opt->count() || v_nn_opt->count() || r_opt->count()) {
                throw std::invalid_argument("give either --fit or explicit model parameters, not both");
            }
            const auto doc = json::parse(slurp(fit_json));
            if (doc.at("v_nn_ev").is_null()) throw std::invalid_argument("fit has no pair strength");
            return EnergyModel(doc.at("v_ev").get<double>(), doc.at("v_nn_ev").get<double>(), c6, pr);
        }
        if (v_nn_opt->count() && r_opt->count()) {
            throw std::invalid_argument("give either --v-nn-ev or --r-nn-model-um, not both");
        }
        if (v_nn_opt->count()) return EnergyModel(v_ev, v_nn_ev, c6, pr);
        return EnergyModel::from_r_nn(v_ev, r_nn_model_um, c6, pr);
    }
};

struct NoiseOpts {
    std::size_t shots = 1000;
    std::uint64_t seed = 1;
    double p_fill = NoiseModel{}.p_fill;
    double p_flip = NoiseModel{}.p_readout_flip;
    std::string backend = "auto";
    std::size_t burn_in = 0;

    void add(CLI::App* app) {
        app->add_option("--shots", shots, "Shots per point")->capture_default_str();
        app->add_option("--seed", seed, "Random seed")->capture_default_str();
        app->add_option("--p-fill", p_fill, "Per-site loading probability")->capture_default_str();
        app->add_option("--p-flip", p_flip, "Readout flip probability")->capture_default_str();
        app->add_option("--backend", backend, "Thermal backend: auto | exact | metropolis")->capture_default_str();
        app->add_option("--burn-in", burn_in, "Metropolis burn-in sweeps (0 = 10 N)");
    }

    QpuOptions options(const Geometry& g) const {
        QpuOptions o;
        o.noise = {p_fill, p_flip};
        o.backend = parse_backend(backend);
        o.sign = g.sign_convention();
        o.metropolis = {burn_in, g.threads};
        o.engine = g.engine();
        return o;
    }
};

/// Device and material operating point derived from --detuning-ev / --mu-ev and temperatures.
struct Point {
    double detuning_ev = 0.0;
    double delta_mu_ev = 0.0;
    double temperature_k = 0.0;  // device T or T' depending on mode
};

struct PointOpts {
    double detuning_ev = 0.0;
    double mu_ev = 0.0;
    double temp_k = 41e-6;
    double t_eff_k = 0.0;
    std::string mode = "hardware";
    CLI::Option* detuning_opt = nullptr;
    CLI::Option* mu_opt = nullptr;
    CLI::Option* t_eff_opt = nullptr;

    void add(CLI::App* app) {
        detuning_opt = app->add_option("--detuning-ev", detuning_ev, "Global detuning (eV)");
        mu_opt = app->add_option("--mu-ev", mu_ev, "Chemical potential difference (eV)");
        detuning_opt->excludes(mu_opt);
        app->add_option("--temp-k", temp_k, "Device sampling temperature (K)")->capture_default_str();
        t_eff_opt = app->add_option("--t-eff-k", t_eff_k, "Material temperature T' (K); default alpha_v * T");
        app->add_option("--mode", mode, "Energy model: hardware | material")->capture_default_str();
    }

    bool material() const {
        if (mode == "hardware") return false;
        if (mode == "material") return true;
        throw std::invalid_argument("mode must be hardware or material");
    }

    Point resolve(const RescaledMapping& m) const {
        Point p;
        if (mu_opt->count()) {
            p.delta_mu_ev = mu_ev;
            p.detuning_ev = m.detuning_for(mu_ev);
        } else {
            p.detuning_ev = detuning_ev;
            p.delta_mu_ev = m.mu_for(detuning_ev);
        }
        p.temperature_k = material() ? (t_eff_opt->count() ? t_eff_k : m.effective_temperature(temp_k)) : temp_k;
        return p;
    }
};

QuadraticEnergy energy_at(bool material, const Lattice& lattice, const EnergyModel& model, const Layout& layout,
                          const HardwareSpec& spec, SignConvention sign, const Point& p) {
    return material ? material_hamiltonian(model, lattice, ChemicalPotential{p.delta_mu_ev})
                    : hardware_hamiltonian(layout, spec, p.detuning_ev, sign);
}

void require_valid_layout(const Layout& layout, const HardwareSpec& spec, std::ostream& err) {
    const auto report = validate_layout(layout, spec);
    if (report.valid()) return;
    for (const auto& v : report.violations) err << "violation [" << v.code << "]: " << v.message << '\n';
    throw ValidationFailure("layout fails hardware validation");
}

/// Expands `--config FILE` into flag tokens placed before the user's own
/// flags, so explicit flags take precedence.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
    std::vector<std::string> rest;
    std::string config_path;
    for (std::size_t i = 1; i < args.size(); ++i) {
        if (args[i] == "--config") {
            if (i + 1 >= args.size()) throw std::invalid_argument("--config needs a file");
            config_path = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            config_path = args[i].substr(9);
        } else {
            rest.push_back(args[i]);
        }
    }
    std::vector<std::string> out{args.empty() ? std::string("rydmap") : args[0]};
    std::size_t verbs = 0;
    while (verbs < rest.size() && !rest[verbs].empty() && rest[verbs][0] != '-') ++verbs;
    out.insert(out.end(), rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(verbs));
    if (!config_path.empty()) {
        auto in = open_input(config_path);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const auto t = text::trim(line);
            if (t.empty() || t.front() == '#') continue;
            const auto eq = t.find('=');
            if (eq == std::string_view::npos) {
                throw std::invalid_argument(config_path + ":" + std::to_string(line_no) + ": expected key = value");
            }
            const auto key = text::trim(t.substr(0, eq));
            auto value = text::trim(t.substr(eq + 1));
            if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
            out.push_back("--" + std::string(key) + "=" + std::string(value));
        }
    }
    out.insert(out.end(), rest.begin() + static_cast<std::ptrdiff_t>(verbs), rest.end());
    return out;
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Rydberg-array mapping of lattice dopant thermodynamics"};
    app.name(raw_args.empty() ? "rydmap" : raw_args[0]);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every command");
    // Placeholder so --config shows up in help; it is expanded before parsing.
    std::string config_doc;

    std::function<void()> action;

    // fit
    auto* fit = app.add_subcommand("fit", "Fit V and V_NN to a formation-energy dataset");
    std::string fit_dataset, fit_out = "-", fit_residuals;
    Geometry fit_geo;
    fit_geo.add(fit);
    fit->add_option("--dataset", fit_dataset, "Dataset CSV: bitstring,energy_ev,tag[,sic_id]")->required();
    fit->add_option("--out", fit_out, "Fit JSON (default stdout)");
    fit->add_option("--residuals", fit_residuals, "Per-record residual CSV");
    fit->callback([&] {
        action = [&] {
            const auto lattice = fit_geo.build_lattice();
            auto in = open_input(fit_dataset);
            const auto records = read_dataset_csv(in);
            std::vector<DatasetRecord> train, test;
            for (const auto& r : records) (r.tag == "test" ? test : train).push_back(r);
            if (train.empty()) throw FitError(FitError::Kind::no_records, "no records tagged train");
            const auto result = fit_model(train, lattice, fit_geo.spec());
            json doc = to_json(result);
            doc["n_train"] = train.size();
            doc["n_test"] = test.size();
            doc["test"] = test.empty() ? json(nullptr) : to_json(evaluate_metrics(result, test, lattice));
            emit_json(fit_out, out, doc);
            if (!fit_residuals.empty()) {
                emit(fit_residuals, out, [&](std::ostream& os) {
                    os << "bitstring,energy_ev,predicted_ev,residual_ev\n";
                    for (std::size_t r = 0; r < train.size(); ++r) {
                        os << train[r].config.to_bitstring() << ',' << text::format_double(train[r].energy_ev) << ','
                           << text::format_double(train[r].energy_ev - result.residuals_ev[r]) << ','
                           << text::format_double(result.residuals_ev[r]) << '\n';
                    }
                });
            }
        };
    });

    // metrics
    auto* metrics = app.add_subcommand("metrics", "Pearson, Spearman and MSE of a model on a dataset");
    std::string met_dataset, met_tag = "test", met_out = "-";
    Geometry met_geo;
    ModelSource met_model;
    met_geo.add(metrics);
    met_model.add(metrics);
    metrics->add_option("--dataset", met_dataset, "Dataset CSV")->required();
    metrics->add_option("--tag", met_tag, "Records to score: test | train | all")->capture_default_str();
    metrics->add_option("--out", met_out, "Metrics JSON (default stdout)");
    metrics->callback([&] {
        action = [&] {
            const auto lattice = met_geo.build_lattice();
            const auto model = met_model.build(met_geo.spec());
            auto in = open_input(met_dataset);
            std::vector<DatasetRecord> chosen;
            for (auto& r : read_dataset_csv(in)) {
                if (met_tag == "all" || r.tag == met_tag) chosen.push_back(std::move(r));
            }
            if (chosen.empty()) throw std::invalid_argument("no records with tag '" + met_tag + "'");
            FitResult f;
            f.v_ev = model.on_site();
            f.v_nn_ev = model.v_nn();
            emit_json(met_out, out, to_json(evaluate_metrics(f, chosen, lattice)));
        };
    });

    // rescale
    auto* rescale = app.add_subcommand("rescale", "Detuning to chemical-potential table with alpha_v and T' per spacing");
    std::string rs_list = "4,4.5,5", rs_out = "-", rs_grid;
    double rs_temp = 41e-6;
    bool rs_summary = false;
    Geometry rs_geo;
    ModelSource rs_model;
    rs_geo.add(rescale);
    rs_model.add(rescale);
    rescale->add_option("--r-nn-list", rs_list, "Device spacings (um), grid syntax")->capture_default_str();
    rescale->add_option("--temp-k", rs_temp, "Device temperature (K)")->capture_default_str();
    rescale->add_option("--detuning-grid", rs_grid, "Detuning grid (eV); default 10 points over +/- max");
    rescale->add_flag("--summary", rs_summary, "One row per spacing: alpha_v, V/alpha_v, T' and the mu range");
    rescale->add_option("--out", rs_out, "CSV (default stdout)");
    rescale->callback([&] {
        action = [&] {
            const auto spec = rs_geo.spec();
            const auto model = rs_model.build(spec);
            const auto grid = rs_grid.empty() ? linear_grid(-spec.detuning_max_ev, spec.detuning_max_ev, 10)
                                              : parse_grid(rs_grid);
            emit(rs_out, out, [&](std::ostream& os) {
                if (rs_summary) {
                    os << "r_nn_um,alpha_v,v_scaled_ev,t_eff_k,mu_lo_ev,mu_hi_ev\n";
                } else {
                    os << "r_nn_um,alpha_v,t_eff_k,delta_g_ev,delta_mu_ev\n";
                }
                for (double r : parse_grid(rs_list)) {
                    const RescaledMapping m(model, r, spec, rs_geo.sign_convention());
                    const auto alpha = text::format_double(m.alpha_v());
                    const auto t_eff = text::format_double(m.effective_temperature(rs_temp));
                    if (rs_summary) {
                        const auto range = m.mu_range();
                        os << text::format_double(r) << ',' << alpha << ',' << text::format_double(m.v_scaled_ev()) << ','
                           << t_eff << ',' << text::format_double(range.lo_ev) << ',' << text::format_double(range.hi_ev)
                           << '\n';
                        continue;
                    }
                    for (double dg : grid) {
                        os << text::format_double(r) << ',' << alpha << ',' << t_eff << ',' << text::format_double(dg)
                           << ',' << text::format_double(m.mu_for(dg)) << '\n';
                    }
                }
            });
        };
    });

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Mean concentration over a detuning or chemical-potential grid");
    std::string sw_engine = "enumerate", sw_dgrid, sw_mugrid, sw_out = "-", sw_proposal = "stratified:0-10";
    std::size_t sw_samples = 100000;
    Geometry sw_geo;
    ModelSource sw_model;
    NoiseOpts sw_noise;
    PointOpts sw_point;
    sw_geo.add(sweep);
    sw_model.add(sweep);
    sw_noise.add(sweep);
    sweep->add_option("--engine", sw_engine, "enumerate | umc | mock-qpu")->capture_default_str();
    auto* dg_opt = sweep->add_option("--detuning-grid", sw_dgrid, "Detuning grid (eV): lo:hi:n or a,b,c");
    auto* mu_opt = sweep->add_option("--mu-grid", sw_mugrid, "Chemical-potential grid (eV): lo:hi:n or a,b,c");
    dg_opt->excludes(mu_opt);
    sweep->add_option("--temp-k", sw_point.temp_k, "Device temperature (K)")->capture_default_str();
    sw_point.t_eff_opt = sweep->add_option("--t-eff-k", sw_point.t_eff_k, "Material temperature T' (K)");
    sweep->add_option("--mode", sw_point.mode, "hardware | material")->capture_default_str();
    sweep->add_option("--samples", sw_samples, "Monte Carlo samples per point (umc)")->capture_default_str();
    sweep->add_option("--proposal", sw_proposal, "uniform-bits | stratified:KMIN-KMAX")->capture_default_str();
    sweep->add_option("--out", sw_out, "Sweep CSV (default stdout)");
    sweep->callback([&] {
        action = [&] {
            const auto lattice = std::make_shared<const Lattice>(sw_geo.build_lattice());
            const auto spec = sw_geo.spec();
            const auto model = sw_model.build(spec);
            const auto layout = scale_to_hardware(lattice, sw_geo.r_nn_um);
            const RescaledMapping mapping(model, sw_geo.r_nn_um, spec, sw_geo.sign_convention());
            const bool material = sw_point.material();
            // Grid in the mode's native variable.
            std::vector<double> grid;
            if (material) {
                grid = mu_opt->count() ? parse_grid(sw_mugrid) : std::vector<double>{};
                if (dg_opt->count()) {
                    for (double dg : parse_grid(sw_dgrid)) grid.push_back(mapping.mu_for(dg));
                }
                if (grid.empty()) {
                    const auto r = mapping.mu_range();
                    grid = linear_grid(r.lo_ev, r.hi_ev, 10);
                }
            } else {
                grid = dg_opt->count() ? parse_grid(sw_dgrid) : std::vector<double>{};
                if (mu_opt->count()) {
                    for (double mu : parse_grid(sw_mugrid)) grid.push_back(mapping.detuning_for(mu));
                }
                if (grid.empty()) grid = linear_grid(-spec.detuning_max_ev, spec.detuning_max_ev, 10);
            }
            const double temperature =
                material ? (sw_point.t_eff_opt->count() ? sw_point.t_eff_k : mapping.effective_temperature(sw_point.temp_k))
                         : sw_point.temp_k;

            SweepResult result;
            if (sw_engine == "enumerate") {
                result = material ? sweep_material_exact(*lattice, model, mapping, grid, temperature, sw_geo.engine())
                                  : sweep_hardware_exact(layout, mapping, grid, temperature, sw_geo.engine());
            } else if (sw_engine == "umc") {
                const auto proposal = Proposal::parse(sw_proposal);
                for (double g : grid) {
                    Point p;
                    p.detuning_ev = material ? mapping.detuning_for(g) : g;
                    p.delta_mu_ev = material ? g : mapping.mu_for(g);
                    const auto q = energy_at(material, *lattice, model, layout, spec, sw_geo.sign_convention(), p);
                    const auto est = uniform_mc_stats(q, temperature, sw_samples, sw_noise.seed, proposal, sw_geo.threads);
                    result.points.push_back({p.detuning_ev, p.delta_mu_ev, est.stats.mean_concentration,
                                             est.stats.concentration_pmf, est.stats.log_z});
                }
            } else if (sw_engine == "mock-qpu") {
                if (material) throw std::invalid_argument("mock-qpu engine runs in hardware mode only");
                require_valid_layout(layout, spec, err);
                const auto opts = sw_noise.options(sw_geo);
                for (std::size_t i = 0; i < grid.size(); ++i) {
                    const auto set = mock_qpu_run(layout, spec, grid[i], temperature, sw_noise.shots, sw_noise.seed + i, opts);
                    result.points.push_back(sweep_point_from_samples(set, mapping));
                }
            } else {
                throw std::invalid_argument("engine must be enumerate, umc or mock-qpu");
            }
            emit(sw_out, out, [&](std::ostream& os) { write_sweep_csv(os, result); });
        };
    });

    // enumerate
    auto* enumerate = app.add_subcommand("enumerate", "Exact grand-canonical statistics at one operating point");
    std::string en_out = "-", en_hist;
    std::size_t en_bins = 64;
    Geometry en_geo;
    ModelSource en_model;
    PointOpts en_point;
    en_geo.add(enumerate);
    en_model.add(enumerate);
    en_point.add(enumerate);
    enumerate->add_option("--bins", en_bins, "Energy histogram bins")->capture_default_str();
    enumerate->add_option("--histogram", en_hist, "Energy histogram CSV");
    enumerate->add_option("--out", en_out, "Stats JSON (default stdout)");
    enumerate->callback([&] {
        action = [&] {
            const auto lattice = std::make_shared<const Lattice>(en_geo.build_lattice());
            const auto spec = en_geo.spec();
            const auto model = en_model.build(spec);
            const auto layout = scale_to_hardware(lattice, en_geo.r_nn_um);
            const RescaledMapping mapping(model, en_geo.r_nn_um, spec, en_geo.sign_convention());
            const auto p = en_point.resolve(mapping);
            const bool material = en_point.material();
            const auto q = energy_at(material, *lattice, model, layout, spec, en_geo.sign_convention(), p);
            auto opts = en_geo.engine();
            opts.histogram_bins = en_bins;
            const auto st = enumerate_stats(q, p.temperature_k, opts);
            json doc = stats_json(st, true);
            doc["mode"] = en_point.mode;
            doc["n_sites"] = q.size();
            doc["delta_g_ev"] = p.detuning_ev;
            doc["delta_mu_ev"] = p.delta_mu_ev;
            doc["temperature_k"] = p.temperature_k;
            emit_json(en_out, out, doc);
            if (!en_hist.empty()) emit(en_hist, out, [&](std::ostream& os) { write_histogram_csv(os, st.energy_histogram); });
        };
    });

    // umc
    auto* umc = app.add_subcommand("umc", "Importance-weighted Monte Carlo estimate at one operating point");
    std::string umc_out = "-", umc_proposal = "stratified:0-10";
    std::size_t umc_samples = 100000;
    std::uint64_t umc_seed = 1;
    Geometry umc_geo;
    ModelSource umc_model;
    PointOpts umc_point;
    umc_geo.add(umc);
    umc_model.add(umc);
    umc_point.add(umc);
    umc->add_option("--samples", umc_samples, "Number of random configurations")->capture_default_str();
    umc->add_option("--seed", umc_seed, "Random seed")->capture_default_str();
    umc->add_option("--proposal", umc_proposal, "uniform-bits | stratified:KMIN-KMAX")->capture_default_str();
    umc->add_option("--out", umc_out, "Estimate JSON (default stdout)");
    umc->callback([&] {
        action = [&] {
            const auto lattice = std::make_shared<const Lattice>(umc_geo.build_lattice());
            const auto spec = umc_geo.spec();
            const auto model = umc_model.build(spec);
            const auto layout = scale_to_hardware(lattice, umc_geo.r_nn_um);
            const RescaledMapping mapping(model, umc_geo.r_nn_um, spec, umc_geo.sign_convention());
            const auto p = umc_point.resolve(mapping);
            const auto q = energy_at(umc_point.material(), *lattice, model, layout, spec, umc_geo.sign_convention(), p);
            const auto proposal = Proposal::parse(umc_proposal);
            const auto est = uniform_mc_stats(q, p.temperature_k, umc_samples, umc_seed, proposal, umc_geo.threads);
            json doc = stats_json(est.stats, true);
            doc["ess"] = est.ess;
            doc["std_error"] = est.std_error;
            doc["n_samples"] = est.n_samples;
            doc["proposal"] = proposal.to_string();
            doc["delta_g_ev"] = p.detuning_ev;
            doc["delta_mu_ev"] = p.delta_mu_ev;
            doc["temperature_k"] = p.temperature_k;
            emit_json(umc_out, out, doc);
        };
    });

    // sample
    auto* sample = app.add_subcommand("sample", "Mock QPU shots at one detuning (JSONL)");
    std::string sa_out = "-", sa_summary, sa_hist;
    std::size_t sa_bins = 64;
    Geometry sa_geo;
    ModelSource sa_model;
    NoiseOpts sa_noise;
    PointOpts sa_point;
    sa_geo.add(sample);
    sa_model.add(sample);
    sa_noise.add(sample);
    sa_point.detuning_opt = sample->add_option("--detuning-ev", sa_point.detuning_ev, "Global detuning (eV)");
    sa_point.mu_opt = sample->add_option("--mu-ev", sa_point.mu_ev, "Chemical potential difference (eV)");
    sa_point.detuning_opt->excludes(sa_point.mu_opt);
    sample->add_option("--temp-k", sa_point.temp_k, "Device temperature (K)")->capture_default_str();
    sa_point.t_eff_opt = sample->add_option("--t-eff-k", sa_point.t_eff_k, "unused; device temperature applies");
    sample->add_option("--out", sa_out, "Shots JSONL (default stdout)");
    sample->add_option("--summary", sa_summary, "Summary JSON");
    sample->add_option("--histogram", sa_hist, "Energy histogram CSV of valid shots");
    sample->add_option("--bins", sa_bins, "Histogram bins")->capture_default_str();
    sample->callback([&] {
        action = [&] {
            const auto lattice = std::make_shared<const Lattice>(sa_geo.build_lattice());
            const auto spec = sa_geo.spec();
            const auto model = sa_model.build(spec);
            const auto layout = scale_to_hardware(lattice, sa_geo.r_nn_um);
            require_valid_layout(layout, spec, err);
            const RescaledMapping mapping(model, sa_geo.r_nn_um, spec, sa_geo.sign_convention());
            const auto p = sa_point.resolve(mapping);
            const auto set =
                mock_qpu_run(layout, spec, p.detuning_ev, p.temperature_k, sa_noise.shots, sa_noise.seed, sa_noise.options(sa_geo));
            emit(sa_out, out, [&](std::ostream& os) { write_jsonl(os, set); });
            if (!sa_summary.empty()) {
                json doc = {{"shots", set.shots_requested},
                            {"valid", set.valid_count()},
                            {"retained_fraction", set.retained_fraction()},
                            {"backend", set.context.backend},
                            {"delta_g_ev", p.detuning_ev},
                            {"delta_mu_ev", p.delta_mu_ev},
                            {"temperature_k", p.temperature_k},
                            {"seed", set.seed}};
                if (set.valid_count() > 0) {
                    doc["mean_concentration"] = qpu_mean_concentration(set);
                    doc["concentration_pmf"] = concentration_pmf(set);
                }
                emit_json(sa_summary, out, doc);
            }
            if (!sa_hist.empty()) {
                const auto q = hardware_hamiltonian(layout, spec, p.detuning_ev, sa_geo.sign_convention());
                emit(sa_hist, out, [&](std::ostream& os) { write_histogram_csv(os, energy_histogram(set, q, sa_bins)); });
            }
        };
    });

    // fit-temp
    auto* fit_temp = app.add_subcommand("fit-temp", "Fit the device sampling temperature to a measured sweep");
    std::string ft_measured, ft_grid, ft_out = "-", ft_rmse;
    Geometry ft_geo;
    ft_geo.add(fit_temp);
    fit_temp->add_option("--measured", ft_measured, "Measured sweep CSV")->required();
    fit_temp->add_option("--t-grid", ft_grid, "Temperature grid (K); default 1..60 uK in 60 steps");
    fit_temp->add_option("--out", ft_out, "Fit JSON (default stdout)");
    fit_temp->add_option("--rmse-csv", ft_rmse, "RMSE curve CSV");
    fit_temp->callback([&] {
        action = [&] {
            const auto lattice = std::make_shared<const Lattice>(ft_geo.build_lattice());
            const auto layout = scale_to_hardware(lattice, ft_geo.r_nn_um);
            auto in = open_input(ft_measured);
            const auto measured = read_sweep_csv(in);
            const auto grid = ft_grid.empty() ? default_temperature_grid() : parse_grid(ft_grid);
            const auto fitted = fit_effective_temperature(measured, layout, ft_geo.spec(), grid,
                                                          ft_geo.sign_convention(), ft_geo.engine());
            emit_json(ft_out, out,
                      {{"t_star_k", fitted.t_star_k},
                       {"rmse_at_optimum", fitted.rmse_at_optimum},
                       {"points", measured.points.size()},
                       {"grid_size", grid.size()}});
            if (!ft_rmse.empty()) {
                emit(ft_rmse, out, [&](std::ostream& os) {
                    os << "temperature_k,rmse\n";
                    for (std::size_t t = 0; t < fitted.rmse.size(); ++t) {
                        os << text::format_double(fitted.temperatures_k[t]) << ',' << text::format_double(fitted.rmse[t])
                           << '\n';
                    }
                });
            }
        };
    });

    // compare
    auto* compare = app.add_subcommand("compare", "TVD and mean differences between two pmfs or sweeps");
    std::string cmp_a, cmp_b, cmp_out = "-";
    compare->add_option("a", cmp_a, "pmf JSON array, {\"concentration_pmf\": [...]}, or sweep CSV")->required();
    compare->add_option("b", cmp_b, "Same formats as a")->required();
    compare->add_option("--out", cmp_out, "Metrics JSON (default stdout)");
    compare->callback([&] {
        action = [&] {
            auto load = [](const std::string& path) {
                const auto body = slurp(path);
                const auto t = text::trim(body);
                std::vector<std::vector<double>> pmfs;
                if (!t.empty() && t.front() == '[') {
                    pmfs.push_back(json::parse(t).get<std::vector<double>>());
                } else if (!t.empty() && t.front() == '{') {
                    const auto doc = json::parse(t);
                    pmfs.push_back(doc.at(doc.contains("concentration_pmf") ? "concentration_pmf" : "pmf").get<std::vector<double>>());
                } else {
                    std::istringstream ss{std::string(t)};
                    for (const auto& p : read_sweep_csv(ss).points) pmfs.push_back(p.concentration_pmf);
                }
                return pmfs;
            };
            const auto a = load(cmp_a);
            const auto b = load(cmp_b);
            if (a.size() != b.size()) {
                throw std::invalid_argument("inputs have different numbers of points (" + std::to_string(a.size()) + " vs " +
                                            std::to_string(b.size()) + ")");
            }
            auto mean_of = [](const std::vector<double>& p) {
                double m = 0.0;
                for (std::size_t k = 0; k < p.size(); ++k) m += static_cast<double>(k) * p[k];
                return m;
            };
            json tvds = json::array(), diffs = json::array(), means_a = json::array(), means_b = json::array();
            double sq = 0.0, tvd_sum = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) {
                const double d = tvd(a[i], b[i]);
                tvds.push_back(d);
                tvd_sum += d;
                std::vector<double> diff(a[i].size());
                for (std::size_t k = 0; k < diff.size(); ++k) diff[k] = a[i][k] - b[i][k];
                diffs.push_back(diff);
                const double ma = mean_of(a[i]), mb = mean_of(b[i]);
                means_a.push_back(ma);
                means_b.push_back(mb);
                sq += (ma - mb) * (ma - mb);
            }
            json doc;
            const double n = static_cast<double>(a.size());
            if (a.size() == 1) {
                doc = {{"tvd", tvds[0]}, {"mean_a", means_a[0]}, {"mean_b", means_b[0]}, {"per_bin_diff", diffs[0]}};
            } else {
                doc = {{"points", a.size()},      {"tvd", tvds},       {"mean_tvd", a.empty() ? 0.0 : tvd_sum / n},
                       {"rmse_mean", a.empty() ? 0.0 : std::sqrt(sq / n)}, {"mean_a", means_a}, {"mean_b", means_b},
                       {"per_bin_diff", diffs}};
            }
            emit_json(cmp_out, out, doc);
        };
    });

    // symmetry
    auto* symmetry = app.add_subcommand("symmetry", "Symmetry-independent configurations");
    symmetry->require_subcommand(1);
    auto* reduce = symmetry->add_subcommand("reduce", "Reduce configurations to canonical representatives");
    std::string red_input, red_out = "-", red_group;
    Geometry red_geo;
    red_geo.add(reduce);
    reduce->add_option("--input", red_input, "Dataset CSV or one bitstring per line")->required();
    reduce->add_option("--out", red_out, "CSV bitstring,multiplicity,sic_id (default stdout)");
    reduce->add_option("--group-out", red_group, "Group JSON");
    auto* expand = symmetry->add_subcommand("expand-dataset", "Expand representatives to every equivalent configuration");
    std::string exp_dataset, exp_out = "-";
    Geometry exp_geo;
    exp_geo.add(expand);
    expand->add_option("--dataset", exp_dataset, "Dataset CSV of representatives")->required();
    expand->add_option("--out", exp_out, "Expanded dataset CSV (default stdout)");

    auto group_for = [](const Lattice& lattice) { return lattice.periodic() ? automorphisms(lattice) : point_group(lattice); };
    reduce->callback([&] {
        action = [&] {
            const auto lattice = red_geo.build_lattice();
            const auto group = group_for(lattice);
            std::vector<Configuration> configs;
            auto in = open_input(red_input);
            std::string first;
            std::string line;
            std::size_t line_no = 0;
            std::vector<std::string> lines;
            while (std::getline(in, line)) lines.push_back(line);
            const bool dataset = !lines.empty() && text::trim(lines.front()).rfind("bitstring", 0) == 0;
            if (dataset) {
                std::istringstream ss(slurp(red_input));
                for (const auto& r : read_dataset_csv(ss)) configs.push_back(r.config);
            } else {
                for (const auto& l : lines) {
                    ++line_no;
                    const auto t = text::trim(l);
                    if (t.empty() || t.front() == '#') continue;
                    try {
                        configs.push_back(Configuration::from_bitstring(t));
                    } catch (const std::exception& e) {
                        throw std::invalid_argument("line " + std::to_string(line_no) + ": " + e.what());
                    }
                }
            }
            const auto sics = reduce_to_sic(configs, group);
            emit(red_out, out, [&](std::ostream& os) {
                os << "bitstring,multiplicity,sic_id\n";
                for (std::size_t i = 0; i < sics.size(); ++i) {
                    os << sics[i].representative.to_bitstring() << ',' << sics[i].multiplicity << ',' << i << '\n';
                }
            });
            if (!red_group.empty()) emit_json(red_group, out, to_json(group));
        };
    });
    expand->callback([&] {
        action = [&] {
            const auto lattice = exp_geo.build_lattice();
            const auto group = group_for(lattice);
            auto in = open_input(exp_dataset);
            const auto records = read_dataset_csv(in);
            const auto expanded = expand_dataset(records, group);
            emit(exp_out, out, [&](std::ostream& os) { write_dataset_csv(os, expanded); });
        };
    });

    // schedule
    auto* schedule = app.add_subcommand("schedule", "Annealing waveforms and the device program document");
    ScheduleParams sp;
    std::string sc_out = "-", sc_csv;
    std::size_t sc_points = 1000;
    Geometry sc_geo;
    sc_geo.add(schedule);
    auto* init_opt = schedule->add_option("--detuning-initial-ev", sp.detuning_initial_ev, "Initial detuning (eV); default -max");
    schedule->add_option("--detuning-final-ev", sp.detuning_final_ev, "Final detuning (eV)")->capture_default_str();
    schedule->add_option("--total-time-us", sp.total_time_us, "Total duration (us)")->capture_default_str();
    schedule->add_option("--hold-fraction", sp.hold_fraction, "Initial and final hold fraction")->capture_default_str();
    schedule->add_option("--rabi-peak-rad-s", sp.rabi_peak_rad_s, "Peak Rabi amplitude (rad/s)")->capture_default_str();
    schedule->add_option("--out", sc_out, "Program JSON (default stdout)");
    schedule->add_option("--csv", sc_csv, "Sampled waveform CSV");
    schedule->add_option("--points", sc_points, "CSV samples")->capture_default_str();
    schedule->callback([&] {
        action = [&] {
            const auto spec = sc_geo.spec();
            if (!init_opt->count()) sp.detuning_initial_ev = -spec.detuning_max_ev;
            const auto sched = build_schedule(sp);
            const auto report = validate_schedule(sched, spec);
            if (!report.valid()) {
                for (const auto& v : report.violations) err << "violation [" << v.code << "]: " << v.message << '\n';
                throw ValidationFailure("schedule fails hardware validation");
            }
            const auto lattice = std::make_shared<const Lattice>(sc_geo.build_lattice());
            const auto layout = scale_to_hardware(lattice, sc_geo.r_nn_um);
            require_valid_layout(layout, spec, err);
            json doc = export_program(layout, sched, spec);
            doc["derived"] = {{"ramp_rate_ev_per_us", ramp_rate_ev_per_us(sp)}};
            emit_json(sc_out, out, doc);
            if (!sc_csv.empty()) emit(sc_csv, out, [&](std::ostream& os) { write_schedule_csv(os, sched, sc_points); });
        };
    });

    // validate-layout
    auto* validate = app.add_subcommand("validate-layout", "Check a layout against the device limits");
    std::string vl_layout, vl_out = "-";
    Geometry vl_geo;
    vl_geo.add(validate);
    validate->add_option("--layout", vl_layout, "Layout JSON; default: --lattice scaled to --r-nn-um");
    validate->add_option("--out", vl_out, "Report JSON (default stdout)");
    bool vl_invalid = false;
    validate->callback([&] {
        action = [&] {
            const auto spec = vl_geo.spec();
            const auto layout = vl_layout.empty()
                                    ? scale_to_hardware(std::make_shared<const Lattice>(vl_geo.build_lattice()), vl_geo.r_nn_um)
                                    : layout_from_json(json::parse(slurp(vl_layout)));
            const auto report = validate_layout(layout, spec);
            emit_json(vl_out, out, to_json(report));
            vl_invalid = !report.valid();
        };
    });

    for (auto* sub : app.get_subcommands({})) {
        sub->add_option("--config", config_doc, "Flat key = value file of default flags");
        for (auto* nested : sub->get_subcommands({})) {
            nested->add_option("--config", config_doc, "Flat key = value file of default flags");
        }
    }

    try {
        const auto args = expand_config(raw_args);
        std::vector<std::string> reversed(args.begin() + 1, args.end());
        std::reverse(reversed.begin(), reversed.end());
        app.parse(reversed);
        if (!action) return kOk;
        action();
        return vl_invalid ? kValidationFailure : kOk;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kError;
    } catch (const ValidationFailure& e) {
        err << "validation failed: " << e.what() << '\n';
        return kValidationFailure;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kError;
    }
}

}  // namespace rydmap::cli
