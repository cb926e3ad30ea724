#include "trajprism/provider.hpp"

#include <cstdlib>

#include "httplib.h"
#include "trajprism/error.hpp"
#include "trajprism/jsonl.hpp"

namespace trajprism {

RequestGate::RequestGate(int max_in_flight) : max_(max_in_flight) {
    if (max_in_flight < 1) throw InvalidArgument("max in-flight requests must be at least 1");
}

void RequestGate::acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < max_; });
    ++in_flight_;
}

void RequestGate::release() {
    {
        std::lock_guard lock(mu_);
        --in_flight_;
    }
    cv_.notify_one();
}

HttpGenerator::HttpGenerator(std::string url, int max_in_flight, int timeout_s)
    : url_(std::move(url)), timeout_s_(timeout_s), gate_(max_in_flight) {
    const auto scheme = url_.find("://");
    if (scheme == std::string::npos) throw ConfigError("provider url needs a scheme: " + url_);
    const auto slash = url_.find('/', scheme + 3);
    host_ = url_.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : url_.substr(slash);
}

std::string HttpGenerator::complete(const PromptBundle& p) {
    RequestGate::Ticket ticket(gate_);
    httplib::Client cli(host_);
    cli.set_connection_timeout(timeout_s_);
    cli.set_read_timeout(timeout_s_);
    const json body = {{"system", p.system}, {"user", p.user}};
    auto res = cli.Post(path_, body.dump(), "application/json");
    if (!res) {
        throw ProviderError("request to " + url_ + " failed: " + httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
        throw ProviderError("provider " + url_ + " returned HTTP " + std::to_string(res->status));
    }
    return res->body;
}

std::string provider_url_from_env() {
    const char* v = std::getenv("TRAJPRISM_PROVIDER_URL");
    return v ? std::string(v) : std::string();
}

} // namespace trajprism
