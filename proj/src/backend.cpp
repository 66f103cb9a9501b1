#include "intent_ape/backend.hpp"

#include <algorithm>
#include <cctype>
#include <thread>

#include "intent_ape/encoding.hpp"

namespace intent_ape {

namespace {

char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v'; }

std::string to_lower(std::string_view text) {
    std::string out(text);
    std::transform(out.begin(), out.end(), out.begin(), lower);
    return out;
}

/// "answer:\s*(yes|no)" anywhere in a single lowercased line.
std::optional<Label> answer_in_line(std::string_view line) {
    constexpr std::string_view kKey = "answer:";
    std::size_t pos = 0;
    while ((pos = line.find(kKey, pos)) != std::string_view::npos) {
        std::size_t i = pos + kKey.size();
        while (i < line.size() && is_space(line[i])) {
            ++i;
        }
        const auto rest = line.substr(i);
        if (rest.starts_with("yes")) return Label::Crossing;
        if (rest.starts_with("no")) return Label::NotCrossing;
        pos += kKey.size();
    }
    return std::nullopt;
}

bool contains_word(std::string_view text, std::string_view word) {
    std::size_t pos = 0;
    while ((pos = text.find(word, pos)) != std::string_view::npos) {
        const bool left = pos == 0 || !is_word_char(text[pos - 1]);
        const std::size_t end = pos + word.size();
        const bool right = end >= text.size() || !is_word_char(text[end]);
        if (left && right) {
            return true;
        }
        pos += 1;
    }
    return false;
}

}  // namespace

void validate(const VisionQuery& query) {
    if (!query.payload || query.payload->empty()) {
        throw ValidationError("vision query has an empty payload");
    }
    if (!(query.temperature >= 0)) {
        throw ValidationError("vision query temperature must be >= 0");
    }
}

std::string_view to_string(BackendKind kind) {
    return kind == BackendKind::RemoteChat ? "remote_chat" : "mock_oracle";
}

std::string BackendDescriptor::id() const {
    std::string out(to_string(kind));
    out += ":" + model_name;
    if (endpoint) {
        out += "@" + *endpoint;
    }
    return out;
}

void validate(const BackendDescriptor& descriptor) {
    if (descriptor.kind == BackendKind::RemoteChat && (!descriptor.endpoint || descriptor.endpoint->empty())) {
        throw ConfigError("remote chat backend requires an endpoint");
    }
    if (descriptor.max_inflight <= 0) {
        throw ConfigError("max_inflight must be positive");
    }
}

std::optional<Label> try_parse_label(std::string_view raw_text) noexcept {
    try {
        const std::string text = to_lower(raw_text);
        const std::string_view view(text);
        std::size_t end = view.size();
        while (true) {
            const std::size_t start = end == 0 ? std::string_view::npos : view.rfind('\n', end - 1);
            const std::size_t begin = start == std::string_view::npos ? 0 : start + 1;
            if (auto label = answer_in_line(view.substr(begin, end - begin))) {
                return label;
            }
            if (begin == 0) {
                break;
            }
            end = begin - 1;
        }
        const bool yes = contains_word(view, "yes");
        const bool no = contains_word(view, "no");
        if (yes != no) {
            return yes ? Label::Crossing : Label::NotCrossing;
        }
        const bool will_cross = view.find("will cross") != std::string_view::npos;
        const bool will_not_cross = view.find("will not cross") != std::string_view::npos;
        if (will_cross != will_not_cross) {
            return will_cross ? Label::Crossing : Label::NotCrossing;
        }
    } catch (...) {
    }
    return std::nullopt;
}

Label parse_label(std::string_view raw_text) {
    if (auto label = try_parse_label(raw_text)) {
        return *label;
    }
    throw ParseFailure(std::string(raw_text));
}

TokenBucket::TokenBucket(double rate_per_second, double burst)
    : rate_(rate_per_second), capacity_(std::max(1.0, burst)), tokens_(capacity_), last_(Clock::now()) {}

void TokenBucket::acquire() {
    std::unique_lock lock(mutex_);
    while (true) {
        const auto now = Clock::now();
        tokens_ = std::min(capacity_, tokens_ + std::chrono::duration<double>(now - last_).count() * rate_);
        last_ = now;
        if (tokens_ >= 1.0) {
            tokens_ -= 1.0;
            return;
        }
        const auto wait = std::chrono::duration<double>((1.0 - tokens_) / rate_);
        lock.unlock();
        std::this_thread::sleep_for(wait);
        lock.lock();
    }
}

GatedBackend::GatedBackend(std::shared_ptr<VisionBackend> inner, double requests_per_second)
    : inner_(std::move(inner)), slots_(std::clamp(inner_->descriptor().max_inflight, 1, 1024)) {
    if (requests_per_second > 0) {
        bucket_.emplace(requests_per_second, requests_per_second);
    }
}

Prediction GatedBackend::predict(const VisionQuery& query) {
    if (bucket_) {
        bucket_->acquire();
    }
    slots_.acquire();
    {
        std::lock_guard lock(mutex_);
        peak_ = std::max(peak_, ++inflight_);
    }
    struct Release {
        GatedBackend* self;
        ~Release() {
            {
                std::lock_guard lock(self->mutex_);
                --self->inflight_;
            }
            self->slots_.release();
        }
    } release{this};
    return inner_->predict(query);
}

void real_sleep(std::chrono::milliseconds delay) {
    std::this_thread::sleep_for(delay);
}

std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int attempt, std::uint64_t jitter_seed) {
    double delay = static_cast<double>(policy.base_delay.count());
    for (int i = 1; i < attempt; ++i) {
        delay *= policy.factor;
    }
    const std::uint64_t r = mix_seed(jitter_seed, std::to_string(attempt));
    const double unit = static_cast<double>(r >> 11) / static_cast<double>(1ULL << 53);
    delay *= 1.0 + policy.jitter * unit;
    return std::chrono::milliseconds(static_cast<long long>(delay));
}

}  // namespace intent_ape
