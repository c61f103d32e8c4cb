#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rydmap/configuration.hpp"
#include "rydmap/energetics.hpp"
#include "rydmap/lattice.hpp"

namespace rydmap {

struct DatasetRecord {
    Configuration config;
    double energy_ev = 0.0;  // formation energy
    std::string tag = "train";
    std::optional<long long> sic_id;
};

/// Regressors of the two-parameter model: E ~ V * n_count + V_NN * pair_load.
struct DesignRow {
    std::size_t n_count = 0;
    double pair_load = 0.0;  // sum over shells of occupied pairs * shell factor
};

DesignRow build_design_row(const Lattice& lattice, const Configuration& config);

struct RegressionMetrics {
    std::size_t n = 0;
    std::optional<double> pearson_r;     // absent when either side has zero variance
    std::optional<double> spearman_rho;  // average ranks for ties
    double mse_ev2 = 0.0;
};

RegressionMetrics regression_metrics(std::span<const double> predicted, std::span<const double> reference);

class FitError : public std::runtime_error {
public:
    enum class Kind { no_records, length_mismatch, singular, non_positive_pair };
    FitError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

struct FitResult {
    double v_ev = 0.0;
    std::optional<double> v_nn_ev;         // absent when no record has a pair term
    std::optional<double> r_nn_model_um;   // (C6 / V_NN)^(1/6)
    double c6_ev_um6 = 0.0;
    std::vector<double> residuals_ev;      // reference - prediction, in input order
    RegressionMetrics train;

    double predict(const DesignRow& row) const;
    /// Material model built from the fit. Throws FitError when V_NN is absent.
    EnergyModel model(PairRange range = PairRange::four_shells) const;
};

/// Zero-intercept least squares over (n_count, pair_load), solved in closed
/// form. The result does not depend on record order.
FitResult fit_model(std::span<const DatasetRecord> records, const Lattice& lattice, const HardwareSpec& spec);

RegressionMetrics evaluate_metrics(const FitResult& fit, std::span<const DatasetRecord> records,
                                   const Lattice& lattice);

/// Dataset CSV: header `bitstring,energy_ev,tag[,sic_id]`. Errors name the line.
std::vector<DatasetRecord> read_dataset_csv(std::istream& in);
void write_dataset_csv(std::ostream& out, std::span<const DatasetRecord> records);

nlohmann::json to_json(const RegressionMetrics& metrics);
nlohmann::json to_json(const FitResult& fit);

}  // namespace rydmap
