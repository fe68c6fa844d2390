#include "feedmesh/adaptor.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace feedmesh::adaptors {

std::shared_ptr<ByteSource> SimSourceRegistry::open(const std::string& address) const {
    auto it = factories_.find(address);
    if (it == factories_.end()) throw Error("no simulated source registered at \"" + address + "\"");
    return it->second();
}

AdaptorDescriptor make_descriptor(const catalog::AdaptorRef& ref) {
    if (ref.name != "TweetGenAdaptor" && ref.name != "SocketAdaptor")
        throw Error("unknown adaptor \"" + ref.name + "\"");
    AdaptorDescriptor d;
    d.name = ref.name;
    d.config = ref.config;

    auto api = ref.config.find("api");
    if (api != ref.config.end() && api->second == "pull") {
        d.mode = AdaptorMode::Pull;
        auto interval = ref.config.find("interval");
        if (interval == ref.config.end())
            throw Error("pull-mode adaptor requires an \"interval\" config");
        d.pull_interval_ticks = static_cast<Tick>(std::stoull(interval->second)) * kTicksPerSecond;
    }

    auto datasource = ref.config.find("datasource");
    if (datasource == ref.config.end())
        throw Error("adaptor \"" + ref.name + "\" requires a \"datasource\" config");
    for (const auto& spec : split_list(datasource->second, ',')) {
        EndpointSpec ep;
        size_t at = spec.rfind('@');
        if (at != std::string::npos) {
            ep.address = trim(spec.substr(0, at));
            ep.node = trim(spec.substr(at + 1));
        } else {
            ep.address = spec;
        }
        d.instance_endpoints.push_back(std::move(ep));
    }
    if (d.instance_endpoints.empty()) throw Error("adaptor \"" + ref.name + "\" has no endpoints");
    return d;
}

AdaptorInstanceHandle::AdaptorInstanceHandle(const AdaptorDescriptor& descriptor, size_t instance,
                                             std::shared_ptr<ByteSource> source,
                                             const std::string& feed_name, Tick now)
    : adaptor_name_(descriptor.name),
      feed_name_(feed_name),
      instance_(instance),
      mode_(descriptor.mode),
      pull_interval_(descriptor.pull_interval_ticks),
      backoff_base_(descriptor.retry_backoff_ticks),
      source_(std::move(source)) {
    attempt_connect(now);
}

void AdaptorInstanceHandle::attempt_connect(Tick now) {
    ++attempts_;
    if (source_->connect(feed_name_)) {
        state_ = ConnectionState::Receiving;
        return;
    }
    if (attempts_ >= kRetryBudget) {
        state_ = ConnectionState::FailedTerminal;
        return;
    }
    state_ = ConnectionState::Retrying;
    Tick backoff = backoff_base_ << (attempts_ - 1);
    next_attempt_at_ = now + backoff;
}

Batch AdaptorInstanceHandle::next_batch(Tick now) {
    Batch batch;
    if (state_ == ConnectionState::FailedTerminal) {
        batch.end_of_source = true;
        return batch;
    }
    if (state_ == ConnectionState::Retrying || state_ == ConnectionState::Connecting) {
        if (state_ == ConnectionState::Retrying && now < next_attempt_at_) {
            batch.transient_gap = true;
            return batch;
        }
        attempt_connect(now);
        if (state_ != ConnectionState::Receiving) {
            batch.end_of_source = state_ == ConnectionState::FailedTerminal;
            batch.transient_gap = state_ == ConnectionState::Retrying;
            return batch;
        }
        attempts_ = 0;
    }

    bool issue_request = true;
    if (mode_ == AdaptorMode::Pull) {
        if (requested_once_ && now < last_request_ + pull_interval_) return batch;  // wait out the interval
        requested_once_ = true;
        last_request_ = now;
    }

    auto bytes = source_->read(issue_request);
    if (!bytes) {
        // Connection loss: retry transparently, with a fresh budget.
        state_ = ConnectionState::Retrying;
        attempts_ = 0;
        next_attempt_at_ = now + backoff_base_;
        partial_line_.clear();
        batch.transient_gap = true;
        return batch;
    }

    bytes_ += bytes->size();
    partial_line_ += *bytes;
    size_t start = 0;
    while (true) {
        size_t nl = partial_line_.find('\n', start);
        if (nl == std::string::npos) break;
        std::string line = partial_line_.substr(start, nl - start);
        start = nl + 1;
        if (trim(line).empty()) continue;
        try {
            batch.records.push_back(dataflow::Record::parse(line));
            ++records_;
        } catch (const std::exception&) {
            ++parse_errors_;
        }
    }
    partial_line_.erase(0, start);

    if (batch.records.empty() && source_->exhausted() && partial_line_.empty()) batch.end_of_source = true;
    return batch;
}

namespace {

// Real-mode source: TCP connection speaking the FEED-REQ line protocol, read
// non-blocking so the engine tick loop never stalls on a quiet source.
class TcpSource : public ByteSource {
public:
    explicit TcpSource(std::string address) : address_(std::move(address)) {}

    ~TcpSource() override {
        if (fd_ >= 0) ::close(fd_);
    }

    bool connect(const std::string& feed_name) override {
        if (fd_ >= 0) {
            ::close(fd_);
            fd_ = -1;
        }
        size_t colon = address_.rfind(':');
        if (colon == std::string::npos) return false;
        std::string host = address_.substr(0, colon);
        std::string port = address_.substr(colon + 1);

        addrinfo hints{};
        hints.ai_family = AF_INET;
        hints.ai_socktype = SOCK_STREAM;
        addrinfo* res = nullptr;
        if (getaddrinfo(host.c_str(), port.c_str(), &hints, &res) != 0) return false;
        int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
        if (fd < 0) {
            freeaddrinfo(res);
            return false;
        }
        int rc = ::connect(fd, res->ai_addr, res->ai_addrlen);
        freeaddrinfo(res);
        if (rc != 0) {
            ::close(fd);
            return false;
        }
        std::string handshake = "FEED-REQ " + feed_name + "\n";
        if (::send(fd, handshake.data(), handshake.size(), 0) != static_cast<ssize_t>(handshake.size())) {
            ::close(fd);
            return false;
        }
        fcntl(fd, F_SETFL, fcntl(fd, F_GETFL, 0) | O_NONBLOCK);
        fd_ = fd;
        eof_ = false;
        return true;
    }

    std::optional<std::string> read(bool) override {
        if (fd_ < 0) return std::nullopt;
        std::string out;
        char buf[4096];
        while (true) {
            ssize_t n = ::recv(fd_, buf, sizeof(buf), 0);
            if (n > 0) {
                out.append(buf, static_cast<size_t>(n));
                continue;
            }
            if (n == 0) {
                eof_ = true;
                break;
            }
            if (errno == EAGAIN || errno == EWOULDBLOCK) break;
            return std::nullopt;  // connection lost
        }
        return out;
    }

    bool exhausted() const override { return eof_; }

private:
    std::string address_;
    int fd_ = -1;
    bool eof_ = false;
};

}  // namespace

std::unique_ptr<AdaptorInstanceHandle> open(const AdaptorDescriptor& descriptor, size_t instance,
                                            const SimSourceRegistry& registry, const std::string& feed_name,
                                            Tick now) {
    if (instance >= descriptor.instance_endpoints.size())
        throw Error("adaptor \"" + descriptor.name + "\" has no endpoint for instance " +
                    std::to_string(instance));
    const auto& ep = descriptor.instance_endpoints[instance];
    std::shared_ptr<ByteSource> source;
    if (ep.address.rfind("sim://", 0) == 0 || registry.contains(ep.address)) {
        source = registry.open(ep.address);
    } else {
        source = std::make_shared<TcpSource>(ep.address);
    }
    return std::make_unique<AdaptorInstanceHandle>(descriptor, instance, std::move(source), feed_name, now);
}

ScriptedSource& ScriptedSource::chunk(std::string bytes) {
    events_.push_back({false, std::move(bytes)});
    return *this;
}

ScriptedSource& ScriptedSource::drop_connection() {
    events_.push_back({true, ""});
    return *this;
}

bool ScriptedSource::connect(const std::string&) {
    ++connect_calls_;
    if (refusals_ > 0) {
        --refusals_;
        return false;
    }
    return true;
}

std::optional<std::string> ScriptedSource::read(bool) {
    ++read_calls_;
    if (next_ >= events_.size()) return std::string();
    Event& e = events_[next_++];
    if (e.drop) return std::nullopt;
    return e.bytes;
}

}  // namespace feedmesh::adaptors
