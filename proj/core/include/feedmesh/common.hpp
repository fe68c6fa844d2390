#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace feedmesh {

// Simulated clock tick. One tick is 10 ms of simulated time, so a 2-second
// measurement window is 200 ticks.
using Tick = std::uint64_t;

constexpr Tick kTicksPerSecond = 100;
constexpr Tick kMetricsWindowTicks = 200;   // 2 s windows
constexpr Tick kReportPeriodTicks = 20;     // Feed Manager report cadence
constexpr Tick kHeartbeatPeriodTicks = 10;  // 1 s real / 10 ticks sim
constexpr int kHeartbeatTimeoutBeats = 3;

// Cluster nodes are named A, B, C, ... with a distinguished master that never
// hosts operator instances.
using NodeId = std::string;

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, int line, int column)
        : Error(what + " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")"),
          line_(line),
          column_(column) {}

    int line() const { return line_; }
    int column() const { return column_; }

private:
    int line_;
    int column_;
};

// Deterministic RNG with fully specified output. std::uniform_int_distribution
// is implementation-defined, which would break byte-identical replay, so the
// reductions are done by hand on top of splitmix64.
class DetRng {
public:
    explicit DetRng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n) { return next() % n; }

    double unit() { return static_cast<double>(next() >> 11) * (1.0 / 9007199254740992.0); }

    // Stable sub-stream derivation so independent concerns (placement, content,
    // connector routing) never share a sequence.
    DetRng fork(std::string_view label) const {
        std::uint64_t h = 1469598103934665603ULL;
        for (char c : label) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ULL;
        }
        return DetRng(state_ ^ h);
    }

private:
    std::uint64_t state_;
};

// FNV-1a, used wherever a stable cross-run hash is required (hash partitioning,
// rng stream derivation). Never use std::hash for anything observable.
inline std::uint64_t stable_hash(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

std::vector<std::string> split_list(const std::string& text, char sep);
std::string trim(const std::string& s);

}  // namespace feedmesh
