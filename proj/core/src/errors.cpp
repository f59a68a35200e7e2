#include "cacl/errors.hpp"

#include <iostream>
#include <map>
#include <mutex>

namespace cacl {

namespace {

std::mutex g_warn_mutex;
std::map<std::string, std::size_t, std::less<>>& warn_counts() {
    static std::map<std::string, std::size_t, std::less<>> counts;
    return counts;
}

constexpr std::size_t kEchoLimit = 3;

} // namespace

void warn(std::string_view key, std::string_view message) {
    std::scoped_lock lock(g_warn_mutex);
    auto& counts = warn_counts();
    auto it = counts.find(key);
    std::size_t n = (it == counts.end()) ? 0 : it->second;
    if (n < kEchoLimit) {
        std::cerr << "[warn:" << key << "] " << message << "\n";
    }
    if (it == counts.end()) {
        counts.emplace(std::string(key), 1);
    } else {
        ++it->second;
    }
}

std::size_t warning_count(std::string_view key) {
    std::scoped_lock lock(g_warn_mutex);
    const auto& counts = warn_counts();
    auto it = counts.find(key);
    return it == counts.end() ? 0 : it->second;
}

void reset_warnings() {
    std::scoped_lock lock(g_warn_mutex);
    warn_counts().clear();
}

} // namespace cacl
