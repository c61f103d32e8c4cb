#include "rydmap/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <tuple>
#include <utility>

#include <nlohmann/json.hpp>

#include "rydmap/text_io.hpp"

namespace rydmap {

DesignRow build_design_row(const Lattice& lattice, const Configuration& config) {
    if (config.size() != lattice.size()) {
        throw std::invalid_argument("configuration length " + std::to_string(config.size()) +
                                    " does not match lattice size " + std::to_string(lattice.size()));
    }
    DesignRow row;
    row.n_count = config.count();
    for (int s = 1; s <= kShellCount; ++s) {
        double occupied = 0.0;
        for (const auto& p : lattice.shell_pairs(s)) {
            if (config.test(p.i) && config.test(p.j)) occupied += p.multiplicity;
        }
        row.pair_load += occupied * shell_factor(s);
    }
    return row;
}

namespace {

std::vector<double> average_ranks(std::span<const double> x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(x.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
        i = j + 1;
    }
    return ranks;
}

std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (!(saa > 0.0) || !(sbb > 0.0)) return std::nullopt;
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

}  // namespace

RegressionMetrics regression_metrics(std::span<const double> predicted, std::span<const double> reference) {
    if (predicted.size() != reference.size()) throw std::invalid_argument("prediction and reference lengths differ");
    if (predicted.empty()) throw std::invalid_argument("metrics need at least one record");
    RegressionMetrics m;
    m.n = predicted.size();
    double sq = 0.0;
    for (std::size_t i = 0; i < m.n; ++i) sq += (predicted[i] - reference[i]) * (predicted[i] - reference[i]);
    m.mse_ev2 = sq / static_cast<double>(m.n);
    m.pearson_r = pearson(predicted, reference);
    const auto rp = average_ranks(predicted);
    const auto rr = average_ranks(reference);
    m.spearman_rho = pearson(rp, rr);
    return m;
}

double FitResult::predict(const DesignRow& row) const {
    return v_ev * static_cast<double>(row.n_count) + v_nn_ev.value_or(0.0) * row.pair_load;
}

EnergyModel FitResult::model(PairRange range) const {
    if (!v_nn_ev) throw FitError(FitError::Kind::non_positive_pair, "pair strength was not fitted (no pair terms)");
    return EnergyModel(v_ev, *v_nn_ev, c6_ev_um6, range);
}

FitResult fit_model(std::span<const DatasetRecord> records, const Lattice& lattice, const HardwareSpec& spec) {
    if (records.empty()) throw FitError(FitError::Kind::no_records, "no records");
    std::vector<DesignRow> rows;
    rows.reserve(records.size());
    for (std::size_t r = 0; r < records.size(); ++r) {
        if (records[r].config.size() != lattice.size()) {
            throw FitError(FitError::Kind::length_mismatch,
                           "record " + std::to_string(r + 1) + ": configuration length " +
                               std::to_string(records[r].config.size()) + " does not match lattice size " +
                               std::to_string(lattice.size()));
        }
        rows.push_back(build_design_row(lattice, records[r].config));
    }

    // Sorted summation makes the sums independent of record order.
    std::vector<std::tuple<double, double, double>> design;
    design.reserve(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        design.emplace_back(static_cast<double>(rows[r].n_count), rows[r].pair_load, records[r].energy_ev);
    }
    std::sort(design.begin(), design.end());
    double snn = 0.0, snp = 0.0, spp = 0.0, sne = 0.0, spe = 0.0;
    for (const auto& [n, p, e] : design) {
        snn += n * n;
        snp += n * p;
        spp += p * p;
        sne += n * e;
        spe += p * e;
    }

    FitResult fit;
    fit.c6_ev_um6 = spec.c6_ev_um6();
    if (spp == 0.0) {
        if (snn == 0.0) throw FitError(FitError::Kind::singular, "singular design matrix: every configuration is empty");
        fit.v_ev = sne / snn;
    } else {
        const double det = snn * spp - snp * snp;
        if (!(std::abs(det) > 1e-12 * snn * spp)) {
            throw FitError(FitError::Kind::singular, "singular design matrix: n_count and pair_load are collinear");
        }
        auto solve = [&](double bn, double bp) {
            return std::pair{(bn * spp - bp * snp) / det, (snn * bp - snp * bn) / det};
        };
        auto [v, v_nn] = solve(sne, spe);
        // One refinement step on the residuals recovers the accuracy the normal equations lose.
        double rn = 0.0, rp = 0.0;
        for (const auto& [n, p, e] : design) {
            const double r = e - std::fma(v, n, v_nn * p);
            rn += n * r;
            rp += p * r;
        }
        const auto [dv, dv_nn] = solve(rn, rp);
        v += dv;
        v_nn += dv_nn;
        fit.v_ev = v;
        if (!(v_nn > 0.0)) {
            throw FitError(FitError::Kind::non_positive_pair,
                           "non-positive pair strength (V_NN = " + text::format_double(v_nn) + " eV)");
        }
        fit.v_nn_ev = v_nn;
        fit.r_nn_model_um = std::pow(fit.c6_ev_um6 / v_nn, 1.0 / 6.0);
    }

    std::vector<double> predicted(rows.size());
    std::vector<double> reference(rows.size());
    fit.residuals_ev.resize(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        predicted[r] = fit.predict(rows[r]);
        reference[r] = records[r].energy_ev;
        fit.residuals_ev[r] = reference[r] - predicted[r];
    }
    fit.train = regression_metrics(predicted, reference);
    return fit;
}

RegressionMetrics evaluate_metrics(const FitResult& fit, std::span<const DatasetRecord> records,
                                   const Lattice& lattice) {
    if (records.empty()) throw FitError(FitError::Kind::no_records, "no records");
    std::vector<double> predicted;
    std::vector<double> reference;
    for (const auto& rec : records) {
        predicted.push_back(fit.predict(build_design_row(lattice, rec.config)));
        reference.push_back(rec.energy_ev);
    }
    return regression_metrics(predicted, reference);
}

std::vector<DatasetRecord> read_dataset_csv(std::istream& in) {
    std::vector<DatasetRecord> records;
    std::string line;
    std::size_t line_no = 0;
    bool header = false;
    bool has_sic = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty() || text::trim(line).front() == '#') continue;
        const auto fields = text::split_csv(line);
        auto where = [&] { return "line " + std::to_string(line_no) + ": "; };
        if (!header) {
            std::vector<std::string> names;
            for (const auto& f : fields) names.emplace_back(text::trim(f));
            const bool ok3 = names.size() == 3 && names[0] == "bitstring" && names[1] == "energy_ev" && names[2] == "tag";
            const bool ok4 = names.size() == 4 && names[0] == "bitstring" && names[1] == "energy_ev" &&
                             names[2] == "tag" && names[3] == "sic_id";
            if (!ok3 && !ok4) throw std::invalid_argument(where() + "expected header bitstring,energy_ev,tag[,sic_id]");
            has_sic = ok4;
            header = true;
            continue;
        }
        if (fields.size() != (has_sic ? 4u : 3u)) {
            throw std::invalid_argument(where() + "expected " + std::to_string(has_sic ? 4 : 3) + " fields, got " +
                                        std::to_string(fields.size()));
        }
        DatasetRecord rec;
        try {
            rec.config = Configuration::from_bitstring(text::trim(fields[0]));
            rec.energy_ev = text::parse_double(fields[1], "energy_ev");
            if (!std::isfinite(rec.energy_ev)) throw std::invalid_argument("energy_ev must be finite");
            rec.tag = std::string(text::trim(fields[2]));
            if (rec.tag != "train" && rec.tag != "test") throw std::invalid_argument("tag must be train or test");
            if (has_sic && !text::trim(fields[3]).empty()) rec.sic_id = text::parse_int(fields[3], "sic_id");
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(where() + e.what());
        }
        if (!records.empty() && records.front().config.size() != rec.config.size()) {
            throw std::invalid_argument(where() + "bitstring length " + std::to_string(rec.config.size()) +
                                        " differs from earlier rows (" + std::to_string(records.front().config.size()) +
                                        ")");
        }
        records.push_back(std::move(rec));
    }
    if (records.empty()) throw FitError(FitError::Kind::no_records, "no records");
    return records;
}

void write_dataset_csv(std::ostream& out, std::span<const DatasetRecord> records) {
    const bool has_sic = std::any_of(records.begin(), records.end(), [](const auto& r) { return r.sic_id.has_value(); });
    out << (has_sic ? "bitstring,energy_ev,tag,sic_id\n" : "bitstring,energy_ev,tag\n");
    for (const auto& r : records) {
        out << r.config.to_bitstring() << ',' << text::format_double(r.energy_ev) << ',' << r.tag;
        if (has_sic) out << ',' << (r.sic_id ? std::to_string(*r.sic_id) : std::string());
        out << '\n';
    }
}

nlohmann::json to_json(const RegressionMetrics& m) {
    nlohmann::json j = {{"n", m.n}, {"mse_ev2", m.mse_ev2}};
    j["pearson_r"] = m.pearson_r ? nlohmann::json(*m.pearson_r) : nlohmann::json(nullptr);
    j["spearman_rho"] = m.spearman_rho ? nlohmann::json(*m.spearman_rho) : nlohmann::json(nullptr);
    return j;
}

nlohmann::json to_json(const FitResult& fit) {
    nlohmann::json j;
    j["v_ev"] = fit.v_ev;
    j["v_nn_ev"] = fit.v_nn_ev ? nlohmann::json(*fit.v_nn_ev) : nlohmann::json(nullptr);
    j["r_nn_model_um"] = fit.r_nn_model_um ? nlohmann::json(*fit.r_nn_model_um) : nlohmann::json(nullptr);
    j["c6_ev_um6"] = fit.c6_ev_um6;
    j["train"] = to_json(fit.train);
    return j;
}

}  // namespace rydmap
