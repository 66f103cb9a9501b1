#include "intent_ape/http_transport.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "httplib.h"
#include "intent_ape/backend.hpp"
#include "intent_ape/encoding.hpp"
#include "json.hpp"

namespace intent_ape {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

UrlParts split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("endpoint '" + url + "' is not an absolute URL");
    }
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        return {url, "/"};
    }
    return {url.substr(0, path_start), url.substr(path_start)};
}

HttpResponse HttplibTransport::post(const HttpRequest& request) {
    const auto parts = split_url(request.url);
    httplib::Client client(parts.scheme_host_port);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);

    httplib::Headers headers;
    std::string content_type = "application/json";
    for (const auto& [name, value] : request.headers) {
        if (name == "Content-Type") {
            content_type = value;
        } else {
            headers.emplace(name, value);
        }
    }
    auto result = client.Post(parts.path, headers, request.body, content_type);
    if (!result) {
        throw TransportError(0, true, "no response from " + parts.scheme_host_port + ": " +
                                          httplib::to_string(result.error()));
    }
    HttpResponse response;
    response.status = result->status;
    response.body = result->body;
    for (const auto& [name, value] : result->headers) {
        std::string lower = name;
        std::transform(lower.begin(), lower.end(), lower.begin(),
                       [](char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); });
        response.headers[lower] = value;
    }
    return response;
}

std::string capture_key(const HttpRequest& request) {
    return sha256_hex(request.url + "\n" + request.body);
}

CaptureTransport::CaptureTransport(std::shared_ptr<HttpTransport> inner, fs::path dir)
    : inner_(std::move(inner)), dir_(std::move(dir)) {
    fs::create_directories(dir_);
}

HttpResponse CaptureTransport::post(const HttpRequest& request) {
    auto response = inner_->post(request);
    json record;
    record["request"] = {{"url", request.url}, {"body", request.body}};
    record["response"] = {{"status", response.status}, {"body", response.body}, {"headers", response.headers}};
    const auto path = dir_ / (capture_key(request) + ".json");
    std::lock_guard lock(mutex_);
    std::ofstream out(path, std::ios::binary);
    out << record.dump(2) << "\n";
    return response;
}

ReplayTransport::ReplayTransport(fs::path dir) : dir_(std::move(dir)) {
    if (!fs::is_directory(dir_)) {
        throw ConfigError("replay directory " + dir_.string() + " does not exist");
    }
}

HttpResponse ReplayTransport::post(const HttpRequest& request) {
    const auto key = capture_key(request);
    const auto path = dir_ / (key + ".json");
    if (!fs::is_regular_file(path)) {
        throw TransportError(0, false, "no recorded exchange " + key + " in " + dir_.string());
    }
    json record;
    try {
        std::ifstream in(path);
        record = json::parse(in);
    } catch (const json::exception& e) {
        throw TransportError(0, false, "corrupt capture " + path.string() + ": " + e.what());
    }
    HttpResponse response;
    response.status = record["response"].value("status", 0);
    response.body = record["response"].value("body", std::string());
    if (record["response"].contains("headers")) {
        for (const auto& [name, value] : record["response"]["headers"].items()) {
            response.headers[name] = value.get<std::string>();
        }
    }
    std::lock_guard lock(mutex_);
    ++served_;
    return response;
}

}  // namespace intent_ape
