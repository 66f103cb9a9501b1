#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "intent_ape/backend.hpp"
#include "intent_ape/http_transport.hpp"
#include "intent_ape/remote_backend.hpp"

namespace intent_ape {

class PlaceholderLost : public RuntimeFailure {
  public:
    explicit PlaceholderLost(std::string variant)
        : RuntimeFailure("paraphrase dropped or duplicated a placeholder: " + variant), variant_(std::move(variant)) {}
    [[nodiscard]] const std::string& variant() const noexcept { return variant_; }

  private:
    std::string variant_;
};

/// True when `variant` carries exactly the same multiset of `{name}` tokens as `original`.
[[nodiscard]] bool placeholders_preserved(const std::string& original, const std::string& variant);

/// Produces rewordings of a template used as search perturbations.
class Paraphraser {
  public:
    virtual ~Paraphraser() = default;
    /// Returns n distinct variants, each different from `text`, with every
    /// placeholder kept verbatim. Throws ValidationError for n < 1.
    [[nodiscard]] virtual std::vector<std::string> paraphrase(const std::string& text, int n,
                                                              std::uint64_t seed) = 0;
    [[nodiscard]] virtual std::string id() const = 0;
};

/// Seeded synonym substitutions, sentence reordering and lead-in phrases.
class MockParaphraser final : public Paraphraser {
  public:
    explicit MockParaphraser(int attempts_per_variant = 40) : attempts_per_variant_(attempts_per_variant) {}
    [[nodiscard]] std::vector<std::string> paraphrase(const std::string& text, int n, std::uint64_t seed) override;
    [[nodiscard]] std::string id() const override { return "mock-paraphraser"; }

    /// One candidate rewrite; may equal the input.
    [[nodiscard]] static std::string rewrite(const std::string& text, std::uint64_t seed);

  private:
    int attempts_per_variant_;
};

/// Meta-instruction sent to a chat model to obtain perturbations.
[[nodiscard]] std::string paraphrase_instruction(int n);

/// Lines of a numbered or bulleted list with their markers stripped.
[[nodiscard]] std::vector<std::string> parse_variant_list(const std::string& content);

class RemoteParaphraser final : public Paraphraser {
  public:
    RemoteParaphraser(RemoteChatConfig config, std::shared_ptr<HttpTransport> transport,
                      Sleeper sleeper = real_sleep, int max_rounds = 3);
    [[nodiscard]] std::vector<std::string> paraphrase(const std::string& text, int n, std::uint64_t seed) override;
    [[nodiscard]] std::string id() const override { return "remote-paraphraser:" + config_.model_name; }

  private:
    RemoteChatConfig config_;
    std::shared_ptr<HttpTransport> transport_;
    Sleeper sleeper_;
    int max_rounds_;
};

}  // namespace intent_ape
