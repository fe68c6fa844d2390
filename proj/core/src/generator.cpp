#include "feedmesh/generator.hpp"

#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstring>
#include <thread>

#include "json.hpp"

namespace feedmesh::adaptors {

namespace {

const char* kFirstNames[] = {"Nathan", "Maria",  "Wei",   "Priya", "Diego", "Amara",
                             "Yusuf",  "Elena",  "Kwame", "Hana",  "Lars",  "Aiko"};
const char* kLastNames[] = {"Giesel", "Okafor", "Tanaka", "Silva",  "Novak", "Haddad",
                            "Kim",    "Moreau", "Singh",  "Larsen", "Costa", "Weber"};
const char* kVerbs[] = {"love", "like", "dislike", "cant stand", "recommend", "question"};
const char* kVendors[] = {"verizon", "at-and-t", "iphone", "samsung", "motorola", "sprint", "t-mobile"};
const char* kAspects[] = {"shortcut-menu", "voice-clarity", "plan", "signal", "battery", "touch-screen"};
const char* kFeelings[] = {"is awesome:)", "is terrible:(", "works", "needs work", "surprised me"};

template <size_t N>
const char* pick(DetRng& rng, const char* (&arr)[N]) {
    return arr[rng.below(N)];
}

}  // namespace

std::string TweetFactory::next_line() {
    ++ordinal_;
    char id[64];
    std::snprintf(id, sizeof(id), "%s-%08llu", tag_.c_str(), static_cast<unsigned long long>(ordinal_));
    last_id_ = id;

    std::string first = pick(rng_, kFirstNames);
    std::string last = pick(rng_, kLastNames);
    std::string vendor = pick(rng_, kVendors);
    std::string aspect = pick(rng_, kAspects);

    // Roughly half the tweets carry hashtags, so referred-topics is exercised
    // both ways downstream.
    bool tagged = rng_.below(2) == 0;
    std::string message = std::string(" ") + pick(rng_, kVerbs) + " " + (tagged ? "#" : "") + vendor +
                          " its " + (tagged ? "#" : "") + aspect + " " + pick(rng_, kFeelings);

    nlohmann::json user = {
        {"screen-name", first + last + std::to_string(rng_.below(1000))},
        {"lang", "en"},
        {"friends_count", rng_.below(1000)},
        {"statuses_count", rng_.below(10000)},
        {"name", first + " " + last},
        {"followers_count", rng_.below(100000)},
    };
    double lat = 24.0 + rng_.unit() * 25.0;
    double lng = -124.0 + rng_.unit() * 58.0;
    char send_time[32];
    std::snprintf(send_time, sizeof(send_time), "2014-03-01T%02llu:%02llu:%02llu",
                  static_cast<unsigned long long>(rng_.below(24)),
                  static_cast<unsigned long long>(rng_.below(60)),
                  static_cast<unsigned long long>(rng_.below(60)));

    nlohmann::json tweet = {
        {"tweetId", id},
        {"user", user},
        {"location-lat", std::round(lat * 100.0) / 100.0},
        {"location-long", std::round(lng * 100.0) / 100.0},
        {"send-time", send_time},
        {"message-text", message},
    };
    return tweet.dump() + "\n";
}

SimGenerator::SimGenerator(std::string tag, double records_per_second, double duration_seconds,
                           std::uint64_t seed)
    : factory_(std::move(tag), seed),
      rate_(records_per_second),
      duration_ticks_(static_cast<Tick>(duration_seconds * kTicksPerSecond)) {
    if (records_per_second <= 0) throw Error("generator rate must be > 0");
}

void SimGenerator::step(Tick now) {
    if (stepped_ && now <= last_step_) return;
    stepped_ = true;
    last_step_ = now;
    if (now >= duration_ticks_) return;
    carry_ += rate_ / static_cast<double>(kTicksPerSecond);
    auto n = static_cast<std::uint64_t>(carry_);
    carry_ -= static_cast<double>(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        outbox_ += factory_.next_line();
        keys_.push_back(factory_.last_id());
        ++outbox_records_;
        ++emitted_;
    }
}

bool SimGenerator::finished(Tick now) const { return now >= duration_ticks_; }

std::optional<std::string> SimGenerator::read(bool) {
    std::string out;
    out.swap(outbox_);
    outbox_records_ = 0;
    return out;
}

bool SimGenerator::exhausted() const { return stepped_ && last_step_ >= duration_ticks_ && outbox_.empty(); }

std::vector<std::uint64_t> emission_schedule(double records_per_second, double duration_seconds) {
    std::vector<std::uint64_t> per_tick;
    auto ticks = static_cast<Tick>(duration_seconds * kTicksPerSecond);
    double carry = 0.0;
    for (Tick t = 0; t < ticks; ++t) {
        carry += records_per_second / static_cast<double>(kTicksPerSecond);
        auto n = static_cast<std::uint64_t>(carry);
        carry -= static_cast<double>(n);
        per_tick.push_back(n);
    }
    return per_tick;
}

std::uint64_t run_tcp_generator(const TcpGeneratorOptions& options) {
    int server = ::socket(AF_INET, SOCK_STREAM, 0);
    if (server < 0) throw Error("generator: cannot create socket");
    int yes = 1;
    setsockopt(server, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(static_cast<uint16_t>(options.port));
    if (bind(server, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        ::close(server);
        throw Error("generator: cannot bind port " + std::to_string(options.port));
    }
    if (listen(server, 1) != 0) {
        ::close(server);
        throw Error("generator: listen failed");
    }

    int conn = ::accept(server, nullptr, nullptr);
    ::close(server);
    if (conn < 0) throw Error("generator: accept failed");

    // Handshake: the receiver asks for a feed by name; we accept any.
    std::string handshake;
    char c;
    while (handshake.size() < 256 && ::recv(conn, &c, 1, 0) == 1) {
        if (c == '\n') break;
        handshake += c;
    }
    if (handshake.rfind("FEED-REQ ", 0) != 0) {
        ::close(conn);
        throw Error("generator: bad handshake \"" + handshake + "\"");
    }

    TweetFactory factory(options.tag, options.seed);
    auto schedule = emission_schedule(options.rate, options.duration_seconds);
    auto start = std::chrono::steady_clock::now();
    std::uint64_t sent = 0;
    for (Tick t = 0; t < schedule.size(); ++t) {
        std::string burst;
        for (std::uint64_t i = 0; i < schedule[t]; ++i) burst += factory.next_line();
        if (!burst.empty()) {
            size_t off = 0;
            while (off < burst.size()) {
                ssize_t n = ::send(conn, burst.data() + off, burst.size() - off, MSG_NOSIGNAL);
                if (n <= 0) {
                    ::close(conn);
                    return sent;
                }
                off += static_cast<size_t>(n);
            }
            sent += schedule[t];
        }
        std::this_thread::sleep_until(start + std::chrono::milliseconds(10 * (t + 1)));
    }
    ::close(conn);
    return sent;
}

}  // namespace feedmesh::adaptors
