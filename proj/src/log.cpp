#include "sepeval/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace sepeval::log {

namespace {
std::atomic<Level> g_level{Level::info};
std::mutex g_mutex;

const char* tag(Level level) {
    switch (level) {
        case Level::debug: return "debug";
        case Level::info: return "info";
        case Level::warn: return "warning";
        case Level::error: return "error";
    }
    return "";
}
}  // namespace

void set_level(Level level) { g_level = level; }

void write(Level level, std::string_view message) {
    if (level < g_level.load()) return;
    std::lock_guard lock(g_mutex);
    std::cerr << "sepeval: " << tag(level) << ": " << message << '\n';
}

}  // namespace sepeval::log
