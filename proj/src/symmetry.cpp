#include "rydmap/symmetry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

namespace rydmap {

namespace {

struct PointOp {
    std::array<double, 4> m;  // row-major 2x2
    std::string note;
};

std::vector<PointOp> hexagonal_point_ops() {
    std::vector<PointOp> ops;
    for (int k = 0; k < 6; ++k) {
        const double t = k * std::numbers::pi / 3.0;
        ops.push_back({{std::cos(t), -std::sin(t), std::sin(t), std::cos(t)}, "rotate " + std::to_string(60 * k)});
    }
    for (int k = 0; k < 6; ++k) {
        const double t = 2.0 * k * std::numbers::pi / 6.0;
        ops.push_back({{std::cos(t), std::sin(t), std::sin(t), -std::cos(t)}, "mirror " + std::to_string(30 * k)});
    }
    return ops;
}

Vec2 apply(const PointOp& op, const Vec2& v) {
    return {op.m[0] * v[0] + op.m[1] * v[1], op.m[2] * v[0] + op.m[3] * v[1]};
}

/// Sites sit on a one-third grid of primitive coordinates relative to an A
/// site; lookups use that integer grid, reduced modulo the cell when periodic.
class SiteIndex {
public:
    explicit SiteIndex(const Lattice& lattice) : lattice_(lattice) {
        if (auto d = lattice.supercell_dims()) dims_ = {3LL * (*d)[0], 3LL * (*d)[1]};
        for (const auto& s : lattice.sites()) {
            const auto key = key_of(s.frac_pos);
            if (!key) throw std::logic_error("site off the honeycomb grid");
            index_.emplace(*key, static_cast<int>(s.index));
        }
    }

    int find(const Vec2& p) const {
        const auto key = key_of(p);
        if (!key) return -1;
        const auto it = index_.find(*key);
        return it == index_.end() ? -1 : it->second;
    }

private:
    std::optional<std::array<long long, 2>> key_of(const Vec2& p) const {
        const auto& o = lattice_.origin();
        const double dx = p[0] - o[0];
        const double dy = p[1] - o[1];
        const double v = dy / Lattice::a2[1];
        const double u = (dx - v * Lattice::a2[0]) / Lattice::a1[0];
        const double cu = 3.0 * u;
        const double cv = 3.0 * v;
        long long iu = std::llround(cu);
        long long iv = std::llround(cv);
        if (std::abs(cu - static_cast<double>(iu)) > 1e-6 || std::abs(cv - static_cast<double>(iv)) > 1e-6) {
            return std::nullopt;
        }
        if (dims_[0] > 0) {
            iu = ((iu % dims_[0]) + dims_[0]) % dims_[0];
            iv = ((iv % dims_[1]) + dims_[1]) % dims_[1];
        }
        return std::array<long long, 2>{iu, iv};
    }

    const Lattice& lattice_;
    std::array<long long, 2> dims_{0, 0};
    std::map<std::array<long long, 2>, int> index_;
};

/// Per ordered pair: shell multiplicities and (minimum-image) distance.
struct PairTable {
    std::size_t n = 0;
    std::vector<std::array<int, kShellCount>> shells;
    std::vector<double> distance;

    explicit PairTable(const Lattice& lattice)
        : n(lattice.size()), shells(n * n, std::array<int, kShellCount>{}), distance(n * n, 0.0) {
        for (int s = 1; s <= kShellCount; ++s) {
            for (const auto& p : lattice.shell_pairs(s)) {
                shells[p.i * n + p.j][static_cast<std::size_t>(s - 1)] = p.multiplicity;
                shells[p.j * n + p.i][static_cast<std::size_t>(s - 1)] = p.multiplicity;
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) distance[i * n + j] = i == j ? 0.0 : lattice.distance(i, j);
        }
    }

    bool preserved_by(const std::vector<int>& perm) const {
        for (std::size_t i = 0; i < n; ++i) {
            const auto pi = static_cast<std::size_t>(perm[i]);
            for (std::size_t j = i + 1; j < n; ++j) {
                const auto pj = static_cast<std::size_t>(perm[j]);
                if (shells[i * n + j] != shells[pi * n + pj]) return false;
                if (std::abs(distance[i * n + j] - distance[pi * n + pj]) > 1e-9) return false;
            }
        }
        return true;
    }
};

/// Permutation induced by x -> op(x - pivot) + target, if it is a bijection.
std::optional<std::vector<int>> induced_permutation(const Lattice& lattice, const SiteIndex& index, const PointOp& op,
                                                    const Vec2& pivot, const Vec2& target) {
    const std::size_t n = lattice.size();
    std::vector<int> perm(n);
    std::vector<bool> hit(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& p = lattice.site(i).frac_pos;
        const Vec2 r = apply(op, {p[0] - pivot[0], p[1] - pivot[1]});
        const int j = index.find({r[0] + target[0], r[1] + target[1]});
        if (j < 0 || hit[static_cast<std::size_t>(j)]) return std::nullopt;
        hit[static_cast<std::size_t>(j)] = true;
        perm[i] = j;
    }
    return perm;
}

SymmetryGroup finish(const Lattice& lattice, std::vector<std::pair<std::vector<int>, std::string>> found) {
    SymmetryGroup group;
    group.n_sites = lattice.size();
    std::set<std::vector<int>> seen;
    for (auto& [perm, note] : found) {
        if (!seen.insert(perm).second) continue;
        group.permutations.push_back(std::move(perm));
        group.notes.push_back(std::move(note));
    }
    if (!is_group(group)) throw std::logic_error("symmetry operations do not close into a group");
    return group;
}

void require_length(const Configuration& config, const SymmetryGroup& group) {
    if (config.size() != group.n_sites) {
        throw std::invalid_argument("configuration length " + std::to_string(config.size()) +
                                    " does not match group size " + std::to_string(group.n_sites));
    }
}

}  // namespace

SymmetryGroup automorphisms(const Lattice& lattice) {
    if (!lattice.periodic()) throw std::invalid_argument("automorphisms need a periodic lattice; use point_group for flakes");
    const SiteIndex index(lattice);
    const PairTable pairs(lattice);
    const Vec2 pivot = lattice.site(0).frac_pos;
    std::vector<std::pair<std::vector<int>, std::string>> found;
    for (const auto& op : hexagonal_point_ops()) {
        for (const auto& target : lattice.sites()) {
            auto perm = induced_permutation(lattice, index, op, pivot, target.frac_pos);
            if (!perm || !pairs.preserved_by(*perm)) continue;
            found.emplace_back(std::move(*perm), op.note + ", site 0 -> " + std::to_string(target.index));
        }
    }
    return finish(lattice, std::move(found));
}

SymmetryGroup point_group(const Lattice& lattice) {
    if (lattice.size() == 0) throw std::invalid_argument("point group of an empty lattice");
    const SiteIndex index(lattice);
    const PairTable pairs(lattice);
    Vec2 centroid{0.0, 0.0};
    for (const auto& s : lattice.sites()) {
        centroid[0] += s.frac_pos[0];
        centroid[1] += s.frac_pos[1];
    }
    centroid[0] /= static_cast<double>(lattice.size());
    centroid[1] /= static_cast<double>(lattice.size());
    std::vector<std::pair<std::vector<int>, std::string>> found;
    for (const auto& op : hexagonal_point_ops()) {
        auto perm = induced_permutation(lattice, index, op, centroid, centroid);
        if (perm && pairs.preserved_by(*perm)) found.emplace_back(std::move(*perm), op.note + " about centroid");
    }
    return finish(lattice, std::move(found));
}

bool is_group(const SymmetryGroup& group) {
    const std::size_t n = group.n_sites;
    std::set<std::vector<int>> elements;
    for (const auto& p : group.permutations) {
        if (p.size() != n) return false;
        std::vector<bool> hit(n, false);
        for (int v : p) {
            if (v < 0 || static_cast<std::size_t>(v) >= n || hit[static_cast<std::size_t>(v)]) return false;
            hit[static_cast<std::size_t>(v)] = true;
        }
        elements.insert(p);
    }
    std::vector<int> identity(n);
    for (std::size_t i = 0; i < n; ++i) identity[i] = static_cast<int>(i);
    if (!elements.count(identity)) return false;
    std::vector<int> composed(n);
    for (const auto& g : group.permutations) {
        for (const auto& h : group.permutations) {
            for (std::size_t i = 0; i < n; ++i) composed[i] = g[static_cast<std::size_t>(h[i])];
            if (!elements.count(composed)) return false;
        }
    }
    return true;
}

Configuration canonical_form(const Configuration& config, const SymmetryGroup& group) {
    require_length(config, group);
    Configuration best = config;
    for (const auto& perm : group.permutations) {
        Configuration image = config.permuted(perm);
        if (image < best) best = std::move(image);
    }
    return best;
}

Orbit expand_orbit(const Configuration& config, const SymmetryGroup& group) {
    require_length(config, group);
    std::set<Configuration> images;
    images.insert(config);
    for (const auto& perm : group.permutations) images.insert(config.permuted(perm));
    return {std::vector<Configuration>(images.begin(), images.end())};
}

std::vector<SicEntry> reduce_to_sic(std::span<const Configuration> configs, const SymmetryGroup& group) {
    std::set<Configuration> reps;
    for (const auto& c : configs) reps.insert(canonical_form(c, group));
    std::vector<SicEntry> out;
    out.reserve(reps.size());
    for (const auto& r : reps) out.push_back({r, expand_orbit(r, group).multiplicity()});
    return out;
}

std::vector<DatasetRecord> expand_dataset(std::span<const DatasetRecord> records, const SymmetryGroup& group) {
    std::vector<DatasetRecord> out;
    for (std::size_t r = 0; r < records.size(); ++r) {
        const auto& rec = records[r];
        const long long id = rec.sic_id.value_or(static_cast<long long>(r));
        for (auto& member : expand_orbit(rec.config, group).members) {
            out.push_back({std::move(member), rec.energy_ev, rec.tag, id});
        }
    }
    return out;
}

nlohmann::json to_json(const SymmetryGroup& group) {
    return {{"n_sites", group.n_sites},
            {"order", group.order()},
            {"permutations", group.permutations},
            {"notes", group.notes}};
}

SymmetryGroup group_from_json(const nlohmann::json& doc) {
    SymmetryGroup group;
    group.n_sites = doc.at("n_sites").get<std::size_t>();
    group.permutations = doc.at("permutations").get<std::vector<std::vector<int>>>();
    if (doc.contains("notes")) group.notes = doc.at("notes").get<std::vector<std::string>>();
    if (!is_group(group)) throw std::invalid_argument("permutations do not form a group on " + std::to_string(group.n_sites) + " sites");
    return group;
}

}  // namespace rydmap
