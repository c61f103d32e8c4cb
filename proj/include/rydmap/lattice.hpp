#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace rydmap {

using Vec2 = std::array<double, 2>;

enum class Sublattice { A, B };

struct Site {
    std::size_t index = 0;
    Vec2 frac_pos{};  // lattice units, R_NN = 1
    Sublattice sublattice = Sublattice::A;
};

/// Unordered pair (i < j). For periodic cells `multiplicity` counts the
/// periodic images of j that fall in the pair's shell; it is 1 for flakes.
struct ShellPair {
    std::size_t i = 0;
    std::size_t j = 0;
    int multiplicity = 1;
};

inline constexpr int kShellCount = 4;

/// Separation of shell s (1-based) in units of R_NN: 1, sqrt3, 2, sqrt7.
double shell_distance(int shell);
/// (R_NN / R_s)^6: 1, 1/27, 1/64, 1/343.
double shell_factor(int shell);
/// Shell index 1..4 for a lattice-unit distance, or 0 when beyond shell 4.
int classify_distance(double distance);

/// Honeycomb fragment or periodic supercell. Immutable after construction.
class Lattice {
public:
    /// Primitive vectors of the underlying honeycomb (R_NN = 1).
    static constexpr Vec2 a1{1.7320508075688772, 0.0};
    static constexpr Vec2 a2{0.8660254037844386, 1.5};

    /// Non-periodic lattice from arbitrary lattice-unit positions.
    static Lattice from_positions(std::vector<Vec2> positions);

    std::size_t size() const noexcept { return sites_.size(); }
    const std::vector<Site>& sites() const noexcept { return sites_; }
    const Site& site(std::size_t i) const { return sites_.at(i); }
    bool periodic() const noexcept { return cell_.has_value(); }
    const std::optional<std::array<Vec2, 2>>& cell() const noexcept { return cell_; }
    /// Supercell repetitions along a1, a2; set iff periodic.
    std::optional<std::array<int, 2>> supercell_dims() const noexcept { return dims_; }
    /// Position of an A site used as the origin of primitive coordinates.
    const Vec2& origin() const noexcept { return origin_; }
    const std::string& name() const noexcept { return name_; }

    /// Pairs of shell s in 1..4.
    const std::vector<ShellPair>& shell_pairs(int shell) const;
    std::size_t shell_pair_count(int shell) const;

    /// Lattice-unit separation; minimum image when periodic.
    double distance(std::size_t i, std::size_t j) const;

    /// Site-connectivity over shell-1 pairs.
    bool connected() const;

private:
    friend Lattice build_flake_rect(int rows, int cols);
    friend Lattice build_supercell(int na, int nb);

    Lattice() = default;
    void classify_shells();

    std::vector<Site> sites_;
    std::optional<std::array<Vec2, 2>> cell_;
    std::optional<std::array<int, 2>> dims_;
    Vec2 origin_{};
    std::array<std::vector<ShellPair>, kShellCount> shells_;
    std::string name_;
};

/// Rectangular cut of `rows` zigzag chains with `cols` sites each. Presets:
/// hexagon = 2x3, flake28 = 4x7, flake78 = 6x13.
Lattice build_flake_rect(int rows, int cols);
/// Accepts "flake28", "flake78", "hexagon" or "RxC".
Lattice build_flake(std::string_view preset_or_dims);
/// Periodic na x nb rhombic supercell, 2*na*nb sites.
Lattice build_supercell(int na, int nb);
/// Flake preset, "RxC" or "supercell:NAxNB".
Lattice parse_lattice(std::string_view spec);

enum class AreaMode { standard, tall };
enum class RowMode { standard, tight };

/// Neutral-atom device limits. Defaults describe the tight-row setup of the
/// standard-area device.
struct HardwareSpec {
    double c6_rad_m6_s = 5.42e-24;
    double detuning_max_ev = 8.227649e-8;
    double r_min_atom_um = 4.0;
    double r_min_row_um = 2.0;
    int max_atoms = 256;
    double area_width_um = 76.0;
    double area_height_um = 75.0;
    AreaMode area_mode = AreaMode::standard;
    RowMode row_mode = RowMode::tight;

    static HardwareSpec with_geometry(AreaMode area, RowMode rows);
    double c6_ev_um6() const;
};

/// Lattice mapped onto device coordinates.
struct Layout {
    std::vector<Vec2> positions_um;
    std::shared_ptr<const Lattice> source_lattice;
    double r_nn_um = 0.0;

    std::size_t size() const noexcept { return positions_um.size(); }
    double distance_um(std::size_t i, std::size_t j) const;
};

Layout scale_to_hardware(std::shared_ptr<const Lattice> lattice, double r_nn_um);
inline Layout scale_to_hardware(const Lattice& lattice, double r_nn_um) {
    return scale_to_hardware(std::make_shared<const Lattice>(lattice), r_nn_um);
}

struct Violation {
    std::string code;  // atom_count, min_atom_distance, row_spacing, bounding_box, ...
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool valid() const noexcept { return violations.empty(); }
    bool has(std::string_view code) const;
};

ValidationReport validate_layout(const Layout& layout, const HardwareSpec& spec);

nlohmann::json to_json(const Lattice& lattice);
nlohmann::json to_json(const Layout& layout);
nlohmann::json to_json(const ValidationReport& report);
/// Reads the layout schema; the source lattice is rebuilt as a free
/// (non-periodic) lattice from positions / r_nn.
Layout layout_from_json(const nlohmann::json& doc);

}  // namespace rydmap
