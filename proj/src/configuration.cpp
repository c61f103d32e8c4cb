#include "rydmap/configuration.hpp"

#include <bit>
#include <stdexcept>

namespace rydmap {

namespace {
constexpr std::size_t word_count(std::size_t n) { return (n + 63) / 64; }
}  // namespace

Configuration::Configuration(std::size_t n_sites)
    : n_sites_(n_sites), words_(word_count(n_sites), 0) {}

Configuration Configuration::from_bitstring(std::string_view bits) {
    Configuration c(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i] == '1') {
            c.set(i);
        } else if (bits[i] != '0') {
            throw std::invalid_argument("bitstring contains character other than 0/1 at position " +
                                        std::to_string(i));
        }
    }
    return c;
}

Configuration Configuration::from_mask(std::uint64_t mask, std::size_t n_sites) {
    if (n_sites > 64) throw std::invalid_argument("from_mask supports at most 64 sites");
    if (n_sites < 64 && (mask >> n_sites) != 0) {
        throw std::invalid_argument("mask has bits beyond the site count");
    }
    Configuration c(n_sites);
    if (n_sites > 0) c.words_[0] = mask;
    return c;
}

Configuration Configuration::from_sites(std::span<const std::size_t> occupied, std::size_t n_sites) {
    Configuration c(n_sites);
    for (auto s : occupied) c.set(s);
    return c;
}

bool Configuration::test(std::size_t site) const {
    if (site >= n_sites_) throw std::out_of_range("site index out of range");
    return (words_[site / 64] >> (site % 64)) & 1u;
}

void Configuration::set(std::size_t site, bool value) {
    if (site >= n_sites_) throw std::out_of_range("site index out of range");
    const std::uint64_t bit = std::uint64_t{1} << (site % 64);
    if (value) {
        words_[site / 64] |= bit;
    } else {
        words_[site / 64] &= ~bit;
    }
}

void Configuration::flip(std::size_t site) {
    if (site >= n_sites_) throw std::out_of_range("site index out of range");
    words_[site / 64] ^= std::uint64_t{1} << (site % 64);
}

std::size_t Configuration::count() const noexcept {
    std::size_t total = 0;
    for (auto w : words_) total += static_cast<std::size_t>(std::popcount(w));
    return total;
}

std::string Configuration::to_bitstring() const {
    std::string s(n_sites_, '0');
    for (std::size_t i = 0; i < n_sites_; ++i) {
        if ((words_[i / 64] >> (i % 64)) & 1u) s[i] = '1';
    }
    return s;
}

std::uint64_t Configuration::to_mask() const {
    if (n_sites_ > 64) throw std::logic_error("to_mask requires at most 64 sites");
    return words_.empty() ? 0 : words_[0];
}

std::vector<std::size_t> Configuration::occupied() const {
    std::vector<std::size_t> sites;
    for (std::size_t w = 0; w < words_.size(); ++w) {
        std::uint64_t bits = words_[w];
        while (bits) {
            sites.push_back(w * 64 + static_cast<std::size_t>(std::countr_zero(bits)));
            bits &= bits - 1;
        }
    }
    return sites;
}

Configuration Configuration::permuted(std::span<const int> perm) const {
    if (perm.size() != n_sites_) throw std::invalid_argument("permutation length does not match configuration");
    Configuration out(n_sites_);
    for (auto s : occupied()) out.set(static_cast<std::size_t>(perm[s]));
    return out;
}

std::strong_ordering Configuration::operator<=>(const Configuration& other) const {
    if (n_sites_ != other.n_sites_) return n_sites_ <=> other.n_sites_;
    for (std::size_t w = 0; w < words_.size(); ++w) {
        const std::uint64_t diff = words_[w] ^ other.words_[w];
        if (diff) {
            const int bit = std::countr_zero(diff);
            // The one holding a 0 at the first differing site sorts first.
            return ((words_[w] >> bit) & 1u) ? std::strong_ordering::greater : std::strong_ordering::less;
        }
    }
    return std::strong_ordering::equal;
}

}  // namespace rydmap
