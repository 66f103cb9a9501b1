#include "intent_ape/remote_backend.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>

#include "intent_ape/encoding.hpp"
#include "json.hpp"

namespace intent_ape {

using json = nlohmann::ordered_json;

namespace {

std::string normalise_token(std::string_view token) {
    std::string out;
    for (char c : token) {
        if (std::isalpha(static_cast<unsigned char>(c))) {
            out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    return out;
}

std::string message_content(const json& message) {
    const auto& content = message.at("content");
    if (content.is_string()) {
        return content.get<std::string>();
    }
    std::string out;
    if (content.is_array()) {
        for (const auto& part : content) {
            if (part.value("type", "") == "text") {
                out += part.value("text", "");
            }
        }
    }
    return out;
}

}  // namespace

std::string api_key_from_env() {
    const char* key = std::getenv(kApiKeyEnv);
    if (!key || !*key) {
        throw ConfigError(std::string("environment variable ") + kApiKeyEnv + " is not set");
    }
    return key;
}

std::string build_chat_request(const RemoteChatConfig& config, const VisionQuery& query) {
    json user_content = json::array();
    user_content.push_back({{"type", "text"}, {"text", query.user_text}});
    for (const auto& frame : query.payload->frames) {
        user_content.push_back({{"type", "image_url"}, {"image_url", {{"url", frame.data_url()}}}});
    }
    json messages = json::array();
    if (!query.system_text.empty()) {
        messages.push_back({{"role", "system"}, {"content", query.system_text}});
    }
    messages.push_back({{"role", "user"}, {"content", std::move(user_content)}});

    json body;
    body["model"] = config.model_name;
    body["messages"] = std::move(messages);
    body["temperature"] = query.temperature;
    body["max_tokens"] = config.max_tokens;
    if (config.supports_logprobs && query.request_logprobs) {
        body["logprobs"] = true;
        body["top_logprobs"] = config.top_logprobs;
    }
    return body.dump();
}

AnswerTokenProbability answer_token_probability(const std::string& response_body) {
    AnswerTokenProbability out;
    const auto doc = json::parse(response_body, nullptr, false);
    if (doc.is_discarded() || !doc.contains("choices") || doc["choices"].empty()) {
        return out;
    }
    const auto& choice = doc["choices"][0];
    if (!choice.contains("logprobs") || !choice["logprobs"].is_object() ||
        !choice["logprobs"].contains("content") || !choice["logprobs"]["content"].is_array()) {
        return out;
    }
    const auto& tokens = choice["logprobs"]["content"];
    for (auto it = tokens.rbegin(); it != tokens.rend(); ++it) {
        const auto word = normalise_token(it->value("token", ""));
        if (word != "yes" && word != "no") {
            continue;
        }
        double yes = 0.0;
        double no = 0.0;
        auto add = [&](const json& entry) {
            const auto w = normalise_token(entry.value("token", ""));
            const double p = std::exp(entry.value("logprob", -1e9));
            if (w == "yes") yes += p;
            if (w == "no") no += p;
        };
        if (it->contains("top_logprobs") && (*it)["top_logprobs"].is_array() && !(*it)["top_logprobs"].empty()) {
            for (const auto& alt : (*it)["top_logprobs"]) {
                add(alt);
            }
        } else {
            add(*it);
        }
        if (yes > 0 && no > 0) {
            out.prob_crossing = yes / (yes + no);
        } else if (word == "yes") {
            out.prob_crossing = std::min(1.0, yes);
        } else {
            out.prob_crossing = 1.0 - std::min(1.0, no);
        }
        out.found = true;
        return out;
    }
    return out;
}

Prediction interpret_chat_response(const std::string& response_body, bool supports_logprobs) {
    const auto doc = json::parse(response_body, nullptr, false);
    if (doc.is_discarded() || !doc.contains("choices") || !doc["choices"].is_array() || doc["choices"].empty() ||
        !doc["choices"][0].contains("message")) {
        throw TransportError(200, false, "malformed chat-completions response");
    }
    Prediction out;
    out.raw_text = message_content(doc["choices"][0]["message"]);
    const Label parsed = parse_label(out.raw_text);

    const auto token = supports_logprobs ? answer_token_probability(response_body) : AnswerTokenProbability{};
    if (token.found) {
        out.prob_crossing = token.prob_crossing;
        out.has_true_logprobs = true;
    } else {
        out.prob_crossing = parsed == Label::Crossing ? kPseudoConfidenceCrossing : kPseudoConfidenceNotCrossing;
        out.has_true_logprobs = false;
    }
    out.label = label_for(out.prob_crossing);
    return out;
}

void throw_for_status(const HttpResponse& response) {
    if (response.status == 429) {
        long long ms = 0;
        if (auto it = response.headers.find("retry-after"); it != response.headers.end()) {
            ms = static_cast<long long>(std::atof(it->second.c_str()) * 1000.0);
        }
        throw RateLimited(std::chrono::milliseconds(ms));
    }
    const bool retriable = response.status == 408 || response.status >= 500;
    throw TransportError(response.status, retriable, response.body.substr(0, 200));
}

RemoteChatBackend::RemoteChatBackend(RemoteChatConfig config, std::shared_ptr<HttpTransport> transport,
                                     Sleeper sleeper)
    : config_(std::move(config)), transport_(std::move(transport)), sleeper_(std::move(sleeper)) {
    validate(descriptor());
    (void)split_url(config_.endpoint);  // rejects malformed endpoints up front
}

BackendDescriptor RemoteChatBackend::descriptor() const {
    BackendDescriptor d;
    d.kind = BackendKind::RemoteChat;
    d.endpoint = config_.endpoint;
    d.model_name = config_.model_name;
    d.supports_logprobs = config_.supports_logprobs;
    d.max_inflight = config_.max_inflight;
    return d;
}

Prediction RemoteChatBackend::predict(const VisionQuery& query) {
    validate(query);
    HttpRequest request;
    request.url = config_.endpoint;
    request.body = build_chat_request(config_, query);
    request.headers.emplace_back("Content-Type", "application/json");
    if (!config_.api_key.empty()) {
        request.headers.emplace_back("Authorization", "Bearer " + config_.api_key);
    }
    const auto started = std::chrono::steady_clock::now();
    const auto response = with_retries(config_.retry, sleeper_, mix_seed(0, query.sample_id), [&] {
        ++attempts_;
        auto r = transport_->post(request);
        if (r.status < 200 || r.status >= 300) {
            throw_for_status(r);
        }
        return r;
    });
    auto prediction = interpret_chat_response(response.body, config_.supports_logprobs);
    prediction.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                std::chrono::steady_clock::now() - started)
                                .count();
    return prediction;
}

}  // namespace intent_ape
