#pragma once

#include <cstdint>
#include <string_view>

namespace ldreg {

// Counter-based stream: output k is splitmix64_mix(key + k * golden).
// Sub-streams are keyed by mixing the parent key with an FNV-1a hash of a label,
// so adding draws to one stage never shifts another.
class Rng {
public:
    static constexpr const char* algorithm = "splitmix64-counter/fnv1a-split";

    explicit Rng(std::uint64_t seed);
    Rng split(std::string_view label) const;
    Rng split(std::uint64_t index) const;

    std::uint64_t next_u64();
    double uniform();  // [0, 1)
    double uniform(double lo, double hi);
    double normal();
    std::uint64_t below(std::uint64_t n);  // unbiased, n > 0

    std::uint64_t key() const { return key_; }
    std::uint64_t counter() const { return ctr_; }

    static std::uint64_t mix(std::uint64_t z);
    static std::uint64_t hash_label(std::string_view label);

private:
    Rng(std::uint64_t key, int) : key_(key) {}
    std::uint64_t key_;
    std::uint64_t ctr_ = 0;
};

}  // namespace ldreg
