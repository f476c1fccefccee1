#ifndef GMSPLIT_HASH_HPP
#define GMSPLIT_HASH_HPP

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace gmsplit {

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex16(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

} // namespace gmsplit

#endif // GMSPLIT_HASH_HPP
