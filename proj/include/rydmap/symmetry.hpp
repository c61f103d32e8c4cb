#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rydmap/configuration.hpp"
#include "rydmap/fitting.hpp"
#include "rydmap/lattice.hpp"

namespace rydmap {

/// Site permutations of a lattice; permutations[g][i] is the image of site i.
struct SymmetryGroup {
    std::size_t n_sites = 0;
    std::vector<std::vector<int>> permutations;
    std::vector<std::string> notes;  // how each element was generated

    std::size_t order() const noexcept { return permutations.size(); }
};

/// Space group of a periodic supercell: the 12 hexagonal point operations
/// combined with every translation taking site 0 to a site, kept when they
/// permute the sites and preserve minimum-image distances and shell pairs.
/// Throws for non-periodic lattices.
SymmetryGroup automorphisms(const Lattice& lattice);

/// Point-group-only mode for flakes: the 12 operations about the site
/// centroid that map the fragment onto itself.
SymmetryGroup point_group(const Lattice& lattice);

/// Contains the identity, closed under composition, every element a bijection.
bool is_group(const SymmetryGroup& group);

/// Lexicographically smallest image of `config`.
Configuration canonical_form(const Configuration& config, const SymmetryGroup& group);

struct Orbit {
    std::vector<Configuration> members;  // sorted, distinct
    std::size_t multiplicity() const noexcept { return members.size(); }
};

Orbit expand_orbit(const Configuration& config, const SymmetryGroup& group);

struct SicEntry {
    Configuration representative;  // canonical form
    std::size_t multiplicity = 0;  // orbit size
};

/// Distinct canonical representatives of `configs` in lexicographic order.
std::vector<SicEntry> reduce_to_sic(std::span<const Configuration> configs, const SymmetryGroup& group);

/// Every symmetry-equivalent copy of each record with the record's energy and
/// tag; sic_id is kept when present, otherwise the record's position.
std::vector<DatasetRecord> expand_dataset(std::span<const DatasetRecord> records, const SymmetryGroup& group);

nlohmann::json to_json(const SymmetryGroup& group);
SymmetryGroup group_from_json(const nlohmann::json& doc);

}  // namespace rydmap
