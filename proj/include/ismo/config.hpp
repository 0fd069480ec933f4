#pragma once

#include <cstdint>
#include <string>

namespace ismo {

// FNV-1a 64-bit content hash; used to fingerprint resolved configs so that
// checkpoints and manifests can be matched to the run that produced them.
inline std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace ismo
