#include <parrot/rng.hpp>

namespace parrot {

std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view label,
                          std::initializer_list<std::uint64_t> coords) noexcept {
    // FNV-1a over the label, then mix in each coordinate.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : label) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::uint64_t state = root ^ h;
    std::uint64_t out = splitmix64(state);
    for (auto c : coords) {
        state ^= c + 0x632be59bd9b4e019ULL;
        out ^= splitmix64(state);
    }
    return out;
}

}  // namespace parrot
