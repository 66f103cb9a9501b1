#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

namespace intent_ape {

struct HttpRequest {
    std::string url;
    std::vector<std::pair<std::string, std::string>> headers;
    std::string body;
};

struct HttpResponse {
    int status = 0;
    std::string body;
    std::map<std::string, std::string> headers;  // lowercase names
};

/// Blocking POST. Throws TransportError when no HTTP response was received.
class HttpTransport {
  public:
    virtual ~HttpTransport() = default;
    [[nodiscard]] virtual HttpResponse post(const HttpRequest& request) = 0;
};

struct UrlParts {
    std::string scheme_host_port;
    std::string path;
};

/// Splits "https://host:port/path?q" into ("https://host:port", "/path?q").
[[nodiscard]] UrlParts split_url(const std::string& url);

class HttplibTransport final : public HttpTransport {
  public:
    explicit HttplibTransport(std::chrono::seconds timeout = std::chrono::seconds(120)) : timeout_(timeout) {}
    [[nodiscard]] HttpResponse post(const HttpRequest& request) override;

  private:
    std::chrono::seconds timeout_;
};

/// Key under which a request is captured: SHA-256 of url and body. Headers
/// (and therefore credentials) are not part of the key or the capture.
[[nodiscard]] std::string capture_key(const HttpRequest& request);

/// Forwards to `inner` and mirrors every exchange to `<dir>/<key>.json`.
class CaptureTransport final : public HttpTransport {
  public:
    CaptureTransport(std::shared_ptr<HttpTransport> inner, std::filesystem::path dir);
    [[nodiscard]] HttpResponse post(const HttpRequest& request) override;

  private:
    std::shared_ptr<HttpTransport> inner_;
    std::filesystem::path dir_;
    std::mutex mutex_;
};

/// Serves captured exchanges; an unrecorded request is a non-retriable TransportError.
class ReplayTransport final : public HttpTransport {
  public:
    explicit ReplayTransport(std::filesystem::path dir);
    [[nodiscard]] HttpResponse post(const HttpRequest& request) override;
    [[nodiscard]] std::size_t served() const noexcept { return served_; }

  private:
    std::filesystem::path dir_;
    std::mutex mutex_;
    std::size_t served_ = 0;
};

}  // namespace intent_ape
