#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace qexp {

/// FNV-1a, stable across platforms (unlike std::hash).
constexpr std::uint64_t fnv1a64(std::string_view data, std::uint64_t h = 0xcbf29ce484222325ULL)
{
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Hex SHA-1 of a git blob object holding `content` (what `git hash-object` prints).
std::string git_blob_sha1(std::string_view content);

std::string_view trim(std::string_view s);

enum class LogLevel { quiet = 0, warning = 1, info = 2 };
void set_log_level(LogLevel level);
void log_warning(std::string_view message);
void log_info(std::string_view message);

}  // namespace qexp
