#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "crowd/log.hpp"
#include "crowd/parallel.hpp"

namespace crowd {

unsigned thread_count() {
    static const unsigned count = [] {
        if (const char* env = std::getenv("CROWD_THREADS")) {
            try {
                const int n = std::stoi(env);
                if (n > 0) return static_cast<unsigned>(n);
            } catch (const std::exception&) {
            }
        }
        return std::max(1u, std::thread::hardware_concurrency());
    }();
    return count;
}

void retain_heap() {
#if defined(__GLIBC__)
    static std::once_flag once;
    std::call_once(once, [] {
        mallopt(M_MMAP_THRESHOLD, 32 << 20);
        mallopt(M_TRIM_THRESHOLD, 1 << 30);
    });
#endif
}

namespace log {

namespace {

Level parse_level() {
    const char* env = std::getenv("CROWD_LOG");
    if (env == nullptr) return Level::Warn;
    const std::string v(env);
    if (v == "debug") return Level::Debug;
    if (v == "info") return Level::Info;
    if (v == "off") return Level::Off;
    return Level::Warn;
}

std::atomic<Level>& current() {
    static std::atomic<Level> level{parse_level()};
    return level;
}

}  // namespace

Level threshold() { return current().load(); }
void set_threshold(Level level) { current().store(level); }

void write(Level level, std::string_view message) {
    if (level < threshold()) return;
    static std::mutex mu;
    std::lock_guard lock(mu);
    static constexpr const char* tags[] = {"debug", "info", "warn", "off"};
    std::cerr << "[crowd " << tags[static_cast<int>(level)] << "] " << message << '\n';
}

}  // namespace log
}  // namespace crowd
