#ifndef TRAJPRISM_PROVIDER_HPP
#define TRAJPRISM_PROVIDER_HPP

#include <condition_variable>
#include <memory>
#include <mutex>
#include <string>

namespace trajprism {

struct PromptBundle {
    std::string system;
    std::string user;

    friend bool operator==(const PromptBundle&, const PromptBundle&) = default;
};

/// Text-in, text-out generation backend.
class Generator {
public:
    virtual ~Generator() = default;
    virtual std::string complete(const PromptBundle& p) = 0;
    virtual std::string name() const = 0;
};

/// Counting semaphore bounding in-flight provider requests.
class RequestGate {
public:
    explicit RequestGate(int max_in_flight);

    class Ticket {
    public:
        explicit Ticket(RequestGate& g) : gate_(g) { gate_.acquire(); }
        ~Ticket() { gate_.release(); }
        Ticket(const Ticket&) = delete;
        Ticket& operator=(const Ticket&) = delete;

    private:
        RequestGate& gate_;
    };

    int max_in_flight() const { return max_; }

private:
    void acquire();
    void release();

    std::mutex mu_;
    std::condition_variable cv_;
    int max_;
    int in_flight_ = 0;
};

/// POSTs {"system": ..., "user": ...} as JSON to `url` and returns the
/// response body. Transport errors and non-2xx statuses raise ProviderError.
class HttpGenerator final : public Generator {
public:
    explicit HttpGenerator(std::string url, int max_in_flight = 4, int timeout_s = 120);

    std::string complete(const PromptBundle& p) override;
    std::string name() const override { return "http:" + url_; }

private:
    std::string url_;
    std::string host_;
    std::string path_;
    int timeout_s_;
    RequestGate gate_;
};

/// Returns the remote provider URL from TRAJPRISM_PROVIDER_URL, or empty.
std::string provider_url_from_env();

} // namespace trajprism

#endif // TRAJPRISM_PROVIDER_HPP
