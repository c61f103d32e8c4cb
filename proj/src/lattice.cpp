#include "rydmap/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "rydmap/units.hpp"

namespace rydmap {

namespace {

constexpr double kShellRelTol = 1e-6;
constexpr std::array<double, kShellCount> kShellDistance{1.0, 1.7320508075688772, 2.0, 2.6457513110645907};
constexpr std::array<double, kShellCount> kShellFactor{1.0, 1.0 / 27.0, 1.0 / 64.0, 1.0 / 343.0};

// Layout comparisons against device limits tolerate float noise in
// positions produced by sqrt(3) scaling.
constexpr double kLengthTolUm = 1e-6;

double norm(const Vec2& v) { return std::hypot(v[0], v[1]); }

std::string format_um(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g um", v);
    return buf;
}

}  // namespace

double shell_distance(int shell) {
    if (shell < 1 || shell > kShellCount) throw std::out_of_range("shell must be in 1..4");
    return kShellDistance[static_cast<std::size_t>(shell - 1)];
}

double shell_factor(int shell) {
    if (shell < 1 || shell > kShellCount) throw std::out_of_range("shell must be in 1..4");
    return kShellFactor[static_cast<std::size_t>(shell - 1)];
}

int classify_distance(double distance) {
    for (int s = 1; s <= kShellCount; ++s) {
        const double f = kShellDistance[static_cast<std::size_t>(s - 1)];
        if (std::abs(distance - f) <= kShellRelTol * f) return s;
    }
    return 0;
}

Lattice Lattice::from_positions(std::vector<Vec2> positions) {
    Lattice lat;
    lat.sites_.reserve(positions.size());
    for (std::size_t i = 0; i < positions.size(); ++i) {
        lat.sites_.push_back({i, positions[i], Sublattice::A});
    }
    lat.origin_ = positions.empty() ? Vec2{0.0, 0.0} : positions.front();
    lat.name_ = "custom";
    lat.classify_shells();
    return lat;
}

const std::vector<ShellPair>& Lattice::shell_pairs(int shell) const {
    if (shell < 1 || shell > kShellCount) throw std::out_of_range("shell must be in 1..4");
    return shells_[static_cast<std::size_t>(shell - 1)];
}

std::size_t Lattice::shell_pair_count(int shell) const {
    std::size_t total = 0;
    for (const auto& p : shell_pairs(shell)) total += static_cast<std::size_t>(p.multiplicity);
    return total;
}

double Lattice::distance(std::size_t i, std::size_t j) const {
    const Vec2& pi = sites_.at(i).frac_pos;
    const Vec2& pj = sites_.at(j).frac_pos;
    Vec2 d{pj[0] - pi[0], pj[1] - pi[1]};
    if (!cell_) return norm(d);

    const auto& [A, B] = *cell_;
    const double det = A[0] * B[1] - A[1] * B[0];
    double fa = (d[0] * B[1] - d[1] * B[0]) / det;
    double fb = (A[0] * d[1] - A[1] * d[0]) / det;
    fa -= std::round(fa);
    fb -= std::round(fb);
    double best = std::numeric_limits<double>::infinity();
    for (int m = -2; m <= 2; ++m) {
        for (int n = -2; n <= 2; ++n) {
            const double x = (fa + m) * A[0] + (fb + n) * B[0];
            const double y = (fa + m) * A[1] + (fb + n) * B[1];
            best = std::min(best, std::hypot(x, y));
        }
    }
    return best;
}

bool Lattice::connected() const {
    if (sites_.empty()) return false;
    std::vector<std::vector<std::size_t>> adj(sites_.size());
    for (const auto& p : shells_[0]) {
        adj[p.i].push_back(p.j);
        adj[p.j].push_back(p.i);
    }
    std::vector<bool> seen(sites_.size(), false);
    std::queue<std::size_t> q;
    q.push(0);
    seen[0] = true;
    std::size_t reached = 1;
    while (!q.empty()) {
        const auto u = q.front();
        q.pop();
        for (auto v : adj[u]) {
            if (!seen[v]) {
                seen[v] = true;
                ++reached;
                q.push(v);
            }
        }
    }
    return reached == sites_.size();
}

void Lattice::classify_shells() {
    for (auto& s : shells_) s.clear();
    const std::size_t n = sites_.size();

    if (!cell_) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                const int s = classify_distance(distance(i, j));
                if (s > 0) shells_[static_cast<std::size_t>(s - 1)].push_back({i, j, 1});
            }
        }
        return;
    }

    // Periodic: count every image of j around i that falls inside shell 4.
    const auto& [A, B] = *cell_;
    const double det = A[0] * B[1] - A[1] * B[0];
    const double min_height = std::abs(det) / std::max(norm(A), norm(B));
    const int reach = static_cast<int>(std::ceil(kShellDistance.back() * (1 + kShellRelTol) / min_height)) + 1;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const Vec2& pi = sites_[i].frac_pos;
            const Vec2& pj = sites_[j].frac_pos;
            const Vec2 d{pj[0] - pi[0], pj[1] - pi[1]};
            double fa = (d[0] * B[1] - d[1] * B[0]) / det;
            double fb = (A[0] * d[1] - A[1] * d[0]) / det;
            fa -= std::round(fa);
            fb -= std::round(fb);
            std::array<int, kShellCount> counts{};
            for (int m = -reach; m <= reach; ++m) {
                for (int k = -reach; k <= reach; ++k) {
                    const double x = (fa + m) * A[0] + (fb + k) * B[0];
                    const double y = (fa + m) * A[1] + (fb + k) * B[1];
                    const int s = classify_distance(std::hypot(x, y));
                    if (s > 0) ++counts[static_cast<std::size_t>(s - 1)];
                }
            }
            for (std::size_t s = 0; s < kShellCount; ++s) {
                if (counts[s] > 0) shells_[s].push_back({i, j, counts[s]});
            }
        }
    }
}

Lattice build_flake_rect(int rows, int cols) {
    if (rows < 1 || cols < 1) throw std::invalid_argument("flake dimensions must be positive");
    Lattice lat;
    const double half_width = Lattice::a2[0];
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            // Sites with even r+c sit on the upper vertex of their zigzag
            // chain (sublattice A) and bond to the chain above.
            const bool upper = (r + c) % 2 == 0;
            const Vec2 pos{c * half_width, 1.5 * r + (upper ? 0.5 : 0.0)};
            lat.sites_.push_back({lat.sites_.size(), pos, upper ? Sublattice::A : Sublattice::B});
        }
    }
    lat.origin_ = lat.sites_.front().frac_pos;
    lat.name_ = std::to_string(rows) + "x" + std::to_string(cols);
    lat.classify_shells();
    if (!lat.connected()) {
        throw std::invalid_argument("flake " + lat.name_ + " is not a connected honeycomb fragment");
    }
    return lat;
}

Lattice build_flake(std::string_view preset_or_dims) {
    if (preset_or_dims == "hexagon") return build_flake_rect(2, 3);
    if (preset_or_dims == "flake28") return build_flake_rect(4, 7);
    if (preset_or_dims == "flake78") return build_flake_rect(6, 13);
    const auto x = preset_or_dims.find('x');
    if (x == std::string_view::npos) {
        throw std::invalid_argument("unknown flake preset '" + std::string(preset_or_dims) + "'");
    }
    try {
        const int rows = std::stoi(std::string(preset_or_dims.substr(0, x)));
        const int cols = std::stoi(std::string(preset_or_dims.substr(x + 1)));
        return build_flake_rect(rows, cols);
    } catch (const std::invalid_argument&) {
        throw;
    } catch (const std::exception&) {
        throw std::invalid_argument("cannot parse flake dimensions '" + std::string(preset_or_dims) + "'");
    }
}

Lattice build_supercell(int na, int nb) {
    if (na < 1 || nb < 1) throw std::invalid_argument("supercell repetitions must be >= 1");
    Lattice lat;
    const auto& a1 = Lattice::a1;
    const auto& a2 = Lattice::a2;
    for (int i = 0; i < na; ++i) {
        for (int j = 0; j < nb; ++j) {
            const Vec2 a{i * a1[0] + j * a2[0], i * a1[1] + j * a2[1]};
            lat.sites_.push_back({lat.sites_.size(), a, Sublattice::A});
            lat.sites_.push_back({lat.sites_.size(), Vec2{a[0], a[1] + 1.0}, Sublattice::B});
        }
    }
    lat.cell_ = std::array<Vec2, 2>{Vec2{na * a1[0], na * a1[1]}, Vec2{nb * a2[0], nb * a2[1]}};
    lat.dims_ = std::array<int, 2>{na, nb};
    lat.origin_ = {0.0, 0.0};
    lat.name_ = "supercell:" + std::to_string(na) + "x" + std::to_string(nb);
    lat.classify_shells();
    return lat;
}

Lattice parse_lattice(std::string_view spec) {
    constexpr std::string_view prefix = "supercell:";
    if (spec.substr(0, prefix.size()) == prefix) {
        const auto dims = spec.substr(prefix.size());
        const auto x = dims.find('x');
        if (x == std::string_view::npos) {
            throw std::invalid_argument("supercell spec must look like supercell:NAxNB");
        }
        try {
            return build_supercell(std::stoi(std::string(dims.substr(0, x))),
                                   std::stoi(std::string(dims.substr(x + 1))));
        } catch (const std::invalid_argument&) {
            throw std::invalid_argument("cannot parse supercell spec '" + std::string(spec) + "'");
        }
    }
    return build_flake(spec);
}

HardwareSpec HardwareSpec::with_geometry(AreaMode area, RowMode rows) {
    HardwareSpec spec;
    spec.area_mode = area;
    spec.row_mode = rows;
    spec.area_width_um = area == AreaMode::tall ? 128.0 : 76.0;
    spec.area_height_um = 75.0;
    spec.r_min_row_um = rows == RowMode::tight ? 2.0 : 4.0;
    return spec;
}

double HardwareSpec::c6_ev_um6() const { return units::c6_to_ev_um6(c6_rad_m6_s); }

double Layout::distance_um(std::size_t i, std::size_t j) const {
    const Vec2& a = positions_um.at(i);
    const Vec2& b = positions_um.at(j);
    return std::hypot(b[0] - a[0], b[1] - a[1]);
}

Layout scale_to_hardware(std::shared_ptr<const Lattice> lattice, double r_nn_um) {
    if (!lattice) throw std::invalid_argument("scale_to_hardware needs a lattice");
    if (!(r_nn_um > 0.0)) throw std::invalid_argument("r_nn must be positive");
    Layout layout;
    layout.r_nn_um = r_nn_um;
    layout.positions_um.reserve(lattice->size());
    for (const auto& s : lattice->sites()) {
        layout.positions_um.push_back({s.frac_pos[0] * r_nn_um, s.frac_pos[1] * r_nn_um});
    }
    layout.source_lattice = std::move(lattice);
    return layout;
}

bool ValidationReport::has(std::string_view code) const {
    return std::any_of(violations.begin(), violations.end(), [&](const Violation& v) { return v.code == code; });
}

ValidationReport validate_layout(const Layout& layout, const HardwareSpec& spec) {
    ValidationReport report;
    const std::size_t n = layout.size();
    if (n == 0) {
        report.violations.push_back({"empty_layout", "layout has no atoms"});
        return report;
    }
    if (n > static_cast<std::size_t>(spec.max_atoms)) {
        report.violations.push_back(
            {"atom_count", std::to_string(n) + " atoms exceed maximum of " + std::to_string(spec.max_atoms)});
    }

    double min_dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) min_dist = std::min(min_dist, layout.distance_um(i, j));
    }
    if (min_dist < spec.r_min_atom_um - kLengthTolUm) {
        report.violations.push_back({"min_atom_distance", "min atom distance " + format_um(spec.r_min_atom_um) +
                                                              " violated: closest pair at " + format_um(min_dist)});
    }

    // Rows are distinct y coordinates after snapping to 1e-3 um.
    std::vector<long long> rows;
    rows.reserve(n);
    for (const auto& p : layout.positions_um) rows.push_back(std::llround(p[1] * 1e3));
    std::sort(rows.begin(), rows.end());
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    double min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t r = 1; r < rows.size(); ++r) min_gap = std::min(min_gap, (rows[r] - rows[r - 1]) * 1e-3);
    if (min_gap < spec.r_min_row_um - kLengthTolUm) {
        report.violations.push_back({"row_spacing", "min row spacing " + format_um(spec.r_min_row_um) +
                                                        " violated: closest rows " + format_um(min_gap) + " apart"});
    }

    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
    for (const auto& p : layout.positions_um) {
        xmin = std::min(xmin, p[0]);
        xmax = std::max(xmax, p[0]);
        ymin = std::min(ymin, p[1]);
        ymax = std::max(ymax, p[1]);
    }
    if (xmax - xmin > spec.area_width_um + kLengthTolUm || ymax - ymin > spec.area_height_um + kLengthTolUm) {
        report.violations.push_back({"bounding_box", "extent " + format_um(xmax - xmin) + " x " +
                                                         format_um(ymax - ymin) + " exceeds " +
                                                         format_um(spec.area_width_um) + " x " +
                                                         format_um(spec.area_height_um)});
    }
    return report;
}

namespace {

nlohmann::json sites_json(const Lattice& lattice, double scale) {
    nlohmann::json sites = nlohmann::json::array();
    for (const auto& s : lattice.sites()) {
        sites.push_back({{"i", s.index},
                         {"x", s.frac_pos[0] * scale},
                         {"y", s.frac_pos[1] * scale},
                         {"sub", s.sublattice == Sublattice::A ? "A" : "B"}});
    }
    return sites;
}

nlohmann::json cell_json(const Lattice& lattice, double scale) {
    if (!lattice.cell()) return nullptr;
    const auto& [a, b] = *lattice.cell();
    return nlohmann::json::array({{a[0] * scale, a[1] * scale}, {b[0] * scale, b[1] * scale}});
}

}  // namespace

nlohmann::json to_json(const Lattice& lattice) {
    return {{"sites", sites_json(lattice, 1.0)},
            {"periodic", lattice.periodic()},
            {"cell", cell_json(lattice, 1.0)},
            {"r_nn_um", nullptr}};
}

nlohmann::json to_json(const Layout& layout) {
    nlohmann::json doc;
    if (layout.source_lattice) {
        doc = {{"sites", sites_json(*layout.source_lattice, layout.r_nn_um)},
               {"periodic", layout.source_lattice->periodic()},
               {"cell", cell_json(*layout.source_lattice, layout.r_nn_um)}};
    } else {
        nlohmann::json sites = nlohmann::json::array();
        for (std::size_t i = 0; i < layout.size(); ++i) {
            sites.push_back({{"i", i}, {"x", layout.positions_um[i][0]}, {"y", layout.positions_um[i][1]}, {"sub", "A"}});
        }
        doc = {{"sites", sites}, {"periodic", false}, {"cell", nullptr}};
    }
    doc["r_nn_um"] = layout.r_nn_um;
    return doc;
}

nlohmann::json to_json(const ValidationReport& report) {
    nlohmann::json v = nlohmann::json::array();
    for (const auto& x : report.violations) v.push_back({{"code", x.code}, {"message", x.message}});
    return {{"valid", report.valid()}, {"violations", v}};
}

Layout layout_from_json(const nlohmann::json& doc) {
    const double r_nn = doc.at("r_nn_um").get<double>();
    if (!(r_nn > 0.0)) throw std::invalid_argument("layout r_nn_um must be positive");
    std::vector<Vec2> frac;
    Layout layout;
    for (const auto& s : doc.at("sites")) {
        const Vec2 p{s.at("x").get<double>(), s.at("y").get<double>()};
        layout.positions_um.push_back(p);
        frac.push_back({p[0] / r_nn, p[1] / r_nn});
    }
    layout.r_nn_um = r_nn;
    layout.source_lattice = std::make_shared<const Lattice>(Lattice::from_positions(std::move(frac)));
    return layout;
}

}  // namespace rydmap
