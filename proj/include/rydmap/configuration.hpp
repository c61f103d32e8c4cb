#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rydmap {

/// Fixed-width occupation vector, n_i in {0,1} with 1 = dopant / Rydberg state.
///
/// Text form is a bitstring whose first character is site 0. Ordering is
/// lexicographic on that text form, so the smallest configuration of a set is
/// the one with the earliest leading zeros.
class Configuration {
public:
    Configuration() = default;
    explicit Configuration(std::size_t n_sites);

    static Configuration from_bitstring(std::string_view bits);
    /// Bit i of `mask` is site i. Requires n_sites <= 64.
    static Configuration from_mask(std::uint64_t mask, std::size_t n_sites);
    static Configuration from_sites(std::span<const std::size_t> occupied, std::size_t n_sites);

    std::size_t size() const noexcept { return n_sites_; }
    bool test(std::size_t site) const;
    void set(std::size_t site, bool value = true);
    void flip(std::size_t site);

    /// Hamming weight.
    std::size_t count() const noexcept;
    bool all() const noexcept { return count() == n_sites_; }
    bool none() const noexcept { return count() == 0; }

    std::string to_bitstring() const;
    std::uint64_t to_mask() const;
    std::vector<std::size_t> occupied() const;

    /// Image under a site permutation: site i moves to perm[i].
    Configuration permuted(std::span<const int> perm) const;

    std::span<const std::uint64_t> words() const noexcept { return words_; }

    bool operator==(const Configuration& other) const = default;
    std::strong_ordering operator<=>(const Configuration& other) const;

private:
    std::size_t n_sites_ = 0;
    std::vector<std::uint64_t> words_;
};

}  // namespace rydmap
