#include "qexp/util.hpp"

#include <atomic>
#include <cstdio>
#include <iostream>
#include <mutex>

#include <openssl/evp.h>

namespace qexp {

namespace {

std::atomic<int> g_log_level{static_cast<int>(LogLevel::warning)};
std::mutex g_log_mutex;

void emit(std::string_view tag, std::string_view message)
{
    std::lock_guard lock(g_log_mutex);
    std::cerr << "[qexp] " << tag << ": " << message << '\n';
}

}  // namespace

std::string git_blob_sha1(std::string_view content)
{
    const std::string header = "blob " + std::to_string(content.size()) + '\0';
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
    EVP_DigestUpdate(ctx, header.data(), header.size());
    EVP_DigestUpdate(ctx, content.data(), content.size());
    EVP_DigestFinal_ex(ctx, digest, &length);
    EVP_MD_CTX_free(ctx);
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < length; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

std::string_view trim(std::string_view s)
{
    constexpr std::string_view ws = " \t\r\n\f\v";
    auto first = s.find_first_not_of(ws);
    if (first == std::string_view::npos) {
        return {};
    }
    auto last = s.find_last_not_of(ws);
    return s.substr(first, last - first + 1);
}

void set_log_level(LogLevel level)
{
    g_log_level.store(static_cast<int>(level));
}

void log_warning(std::string_view message)
{
    if (g_log_level.load() >= static_cast<int>(LogLevel::warning)) {
        emit("warning", message);
    }
}

void log_info(std::string_view message)
{
    if (g_log_level.load() >= static_cast<int>(LogLevel::info)) {
        emit("info", message);
    }
}

}  // namespace qexp
