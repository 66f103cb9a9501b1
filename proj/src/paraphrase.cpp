#include "intent_ape/paraphrase.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <random>
#include <set>

#include "intent_ape/encoding.hpp"
#include "json.hpp"

namespace intent_ape {

using json = nlohmann::ordered_json;

namespace {

// Interchangeable phrasings. Several groups pair a vague term with a concrete
// one so that perturbation can move prompts in either direction.
const std::vector<std::vector<std::string>>& synonym_groups() {
    static const std::vector<std::vector<std::string>> groups = {
        {"posture", "pose", "stance", "body position"},
        {"movement", "motion", "gait"},
        {"movements", "motions", "steps"},
        {"orientation", "heading", "facing direction"},
        {"crosswalk", "zebra crossing", "pedestrian crossing"},
        {"observe", "examine", "look at", "watch"},
        {"determine", "decide", "judge", "assess"},
        {"intend to", "plan to", "want to", "have the desire to"},
        {"intends to", "plans to", "wants to", "has the desire to"},
        {"behaviour", "behavior", "conduct", "actions"},
        {"consider", "take into account", "factor in"},
        {"street", "road", "roadway"},
        {"frames", "images", "snapshots"},
        {"proximity to the", "closeness to the", "distance to the"},
        {"carefully", "closely", "attentively"},
        {"indicate", "suggest", "signal"},
        {"think", "feel", "believe"},
        {"likelihood", "tendency", "chance"},
        {"over the past", "during the last", "in the previous"},
        {"vehicle", "car", "ego-vehicle"},
        {"is moving", "is acting", "is behaving"},
        {"will", "is going to"},
        {"analyse", "analyze", "study", "inspect"},
        {"you are", "you're", "you work as", "you act as"},
        {"the pedestrian", "the person", "the walker", "the marked pedestrian"},
        {"annotating", "labelling", "reviewing"},
        {"video", "footage", "recordings"},
        {"whether", "if"},
    };
    return groups;
}

constexpr std::array<std::string_view, 5> kLeadIns{"Carefully, ", "Step by step, ", "Based on the frames, ",
                                                  "Looking closely, ", "In this scene, "};
constexpr std::array<std::string_view, 4> kClosers{" Be precise.", " Think it through.", " Stay objective.",
                                                   " Keep it brief."};

struct Protected {
    std::string text;
    std::vector<std::string> tokens;
};

bool is_ident(char c) {
    return std::islower(static_cast<unsigned char>(c)) || std::isdigit(static_cast<unsigned char>(c)) || c == '_';
}

std::vector<std::string> placeholder_tokens(const std::string& text) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '{') continue;
        std::size_t j = i + 1;
        while (j < text.size() && is_ident(text[j])) ++j;
        if (j > i + 1 && j < text.size() && text[j] == '}') {
            out.push_back(text.substr(i, j - i + 1));
            i = j;
        }
    }
    return out;
}

// Placeholders become "\x01<n>\x02" so no rewrite step can touch them.
Protected protect(const std::string& text) {
    Protected out;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '{') {
            std::size_t j = i + 1;
            while (j < text.size() && is_ident(text[j])) ++j;
            if (j > i + 1 && j < text.size() && text[j] == '}') {
                out.text += '\x01';
                out.text += std::to_string(out.tokens.size());
                out.text += '\x02';
                out.tokens.push_back(text.substr(i, j - i + 1));
                i = j;
                continue;
            }
        }
        out.text += text[i];
    }
    return out;
}

std::string restore(const std::string& text, const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '\x01') {
            const auto end = text.find('\x02', i);
            const auto index = std::stoul(text.substr(i + 1, end - i - 1));
            out += tokens.at(index);
            i = end;
        } else {
            out += text[i];
        }
    }
    return out;
}

char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }
bool is_word(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }
    bool chance(double p) { return static_cast<double>(engine_() >> 11) / static_cast<double>(1ULL << 53) < p; }

  private:
    std::mt19937_64 engine_;
};

std::string substitute_synonyms(const std::string& text, Rng& rng) {
    std::string lowered(text);
    std::transform(lowered.begin(), lowered.end(), lowered.begin(), lower);

    struct Hit {
        std::size_t pos;
        std::size_t len;
        std::size_t group;
        std::size_t member;
    };
    std::vector<Hit> hits;
    std::vector<bool> taken(text.size(), false);
    const auto& groups = synonym_groups();
    for (std::size_t g = 0; g < groups.size(); ++g) {
        // Longer members first so "body position" wins over a shorter overlap.
        std::vector<std::size_t> order(groups[g].size());
        for (std::size_t m = 0; m < order.size(); ++m) order[m] = m;
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return groups[g][a].size() > groups[g][b].size(); });
        for (std::size_t m : order) {
            const auto& term = groups[g][m];
            std::size_t pos = 0;
            while ((pos = lowered.find(term, pos)) != std::string::npos) {
                const std::size_t end = pos + term.size();
                const bool bounded = (pos == 0 || !is_word(lowered[pos - 1])) && (end >= lowered.size() || !is_word(lowered[end]));
                const bool free = std::none_of(taken.begin() + pos, taken.begin() + end, [](bool t) { return t; });
                if (bounded && free) {
                    hits.push_back({pos, term.size(), g, m});
                    std::fill(taken.begin() + pos, taken.begin() + end, true);
                }
                pos = end;
            }
        }
    }
    std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.pos < b.pos; });

    std::string out;
    std::size_t cursor = 0;
    for (const auto& hit : hits) {
        out.append(text, cursor, hit.pos - cursor);
        const auto& members = groups[hit.group];
        if (members.size() > 1 && rng.chance(0.5)) {
            std::size_t pick = rng.below(members.size() - 1);
            if (pick >= hit.member) ++pick;
            std::string replacement = members[pick];
            if (std::isupper(static_cast<unsigned char>(text[hit.pos]))) {
                replacement[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(replacement[0])));
            }
            out += replacement;
        } else {
            out.append(text, hit.pos, hit.len);
        }
        cursor = hit.pos + hit.len;
    }
    out.append(text, cursor, std::string::npos);
    return out;
}

std::vector<std::string> split_sentences(const std::string& text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i + 1 < text.size(); ++i) {
        if ((text[i] == '.' || text[i] == '?' || text[i] == '!') && text[i + 1] == ' ') {
            out.push_back(text.substr(start, i + 1 - start));
            start = i + 2;
        }
    }
    out.push_back(text.substr(start));
    return out;
}

std::string reorder_sentences(const std::string& text, Rng& rng) {
    auto sentences = split_sentences(text);
    if (sentences.size() < 2) {
        return text;
    }
    const std::size_t i = rng.below(sentences.size() - 1);
    std::swap(sentences[i], sentences[i + 1]);
    std::string out = sentences.front();
    for (std::size_t k = 1; k < sentences.size(); ++k) {
        out += " " + sentences[k];
    }
    return out;
}

std::string toggle_lead_in(const std::string& text, Rng& rng) {
    for (auto lead : kLeadIns) {
        if (text.starts_with(lead)) {
            std::string rest = text.substr(lead.size());
            if (rng.chance(0.5)) {
                std::size_t pick = rng.below(kLeadIns.size());
                if (kLeadIns[pick] == lead) pick = (pick + 1) % kLeadIns.size();
                return std::string(kLeadIns[pick]) + rest;
            }
            if (!rest.empty()) rest[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(rest[0])));
            return rest;
        }
    }
    if (text.size() < 2) {
        return text;
    }
    std::string rest = text;
    if (std::isupper(static_cast<unsigned char>(rest[0])) && std::islower(static_cast<unsigned char>(rest[1]))) {
        rest[0] = lower(rest[0]);
    }
    return std::string(kLeadIns[rng.below(kLeadIns.size())]) + rest;
}

// Appends, replaces or removes one short closing sentence.
std::string toggle_closer(const std::string& text, Rng& rng) {
    for (auto closer : kClosers) {
        if (text.ends_with(closer)) {
            const std::string rest = text.substr(0, text.size() - closer.size());
            if (rng.chance(0.5)) return rest;
            std::size_t pick = rng.below(kClosers.size());
            if (kClosers[pick] == closer) pick = (pick + 1) % kClosers.size();
            return rest + std::string(kClosers[pick]);
        }
    }
    const bool ends_sentence = !text.empty() && (text.back() == '.' || text.back() == '?' || text.back() == '!');
    return ends_sentence ? text + std::string(kClosers[rng.below(kClosers.size())]) : text;
}

}  // namespace

bool placeholders_preserved(const std::string& original, const std::string& variant) {
    auto a = placeholder_tokens(original);
    auto b = placeholder_tokens(variant);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    return a == b && std::count(variant.begin(), variant.end(), '{') == std::count(original.begin(), original.end(), '{');
}

std::string MockParaphraser::rewrite(const std::string& text, std::uint64_t seed) {
    Rng rng(seed);
    auto prot = protect(text);
    std::string body = substitute_synonyms(prot.text, rng);
    if (rng.chance(0.3)) {
        body = reorder_sentences(body, rng);
    }
    if (rng.chance(0.25)) {
        body = toggle_lead_in(body, rng);
    }
    if (rng.chance(0.2)) {
        body = toggle_closer(body, rng);
    }
    return restore(body, prot.tokens);
}

std::vector<std::string> MockParaphraser::paraphrase(const std::string& text, int n, std::uint64_t seed) {
    if (n < 1) {
        throw ValidationError("paraphrase needs n >= 1");
    }
    std::vector<std::string> variants;
    std::set<std::string> seen{text};
    std::optional<std::string> lost;
    const int budget = attempts_per_variant_ * n;
    for (int attempt = 0; attempt < budget && static_cast<int>(variants.size()) < n; ++attempt) {
        auto candidate = rewrite(text, mix_seed(seed, "variant:" + std::to_string(attempt)));
        if (!placeholders_preserved(text, candidate)) {
            lost = candidate;
            continue;
        }
        if (seen.insert(candidate).second) {
            variants.push_back(std::move(candidate));
        }
    }
    if (static_cast<int>(variants.size()) < n) {
        if (lost) {
            throw PlaceholderLost(*lost);
        }
        throw RuntimeFailure("mock paraphraser found only " + std::to_string(variants.size()) + " of " +
                             std::to_string(n) + " distinct variants for: " + text);
    }
    return variants;
}

std::string paraphrase_instruction(int n) {
    return "Rewrite the following instruction in " + std::to_string(n) +
           " different ways, preserving meaning and every {placeholder} token exactly as written (same spelling, "
           "same braces, each appearing the same number of times). Vary grammar, structure and word choice, "
           "for example by rephrasing or using synonyms. Return only the rewrites as a numbered list, one per line.";
}

std::vector<std::string> parse_variant_list(const std::string& content) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= content.size()) {
        auto end = content.find('\n', start);
        if (end == std::string::npos) end = content.size();
        std::string line = content.substr(start, end - start);
        start = end + 1;

        std::size_t i = 0;
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::size_t j = i;
        while (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j]))) ++j;
        if (j > i && j < line.size() && (line[j] == '.' || line[j] == ')' || line[j] == ':')) {
            i = j + 1;
        } else if (i < line.size() && (line[i] == '-' || line[i] == '*')) {
            i += 1;
        }
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        auto last = line.find_last_not_of(" \t\r");
        if (last == std::string::npos || last < i) continue;
        std::string item = line.substr(i, last - i + 1);
        if (item.size() >= 2 && item.front() == '"' && item.back() == '"') {
            item = item.substr(1, item.size() - 2);
        }
        if (!item.empty()) out.push_back(std::move(item));
        if (end == content.size()) break;
    }
    return out;
}

RemoteParaphraser::RemoteParaphraser(RemoteChatConfig config, std::shared_ptr<HttpTransport> transport,
                                     Sleeper sleeper, int max_rounds)
    : config_(std::move(config)), transport_(std::move(transport)), sleeper_(std::move(sleeper)),
      max_rounds_(max_rounds) {}

std::vector<std::string> RemoteParaphraser::paraphrase(const std::string& text, int n, std::uint64_t seed) {
    if (n < 1) {
        throw ValidationError("paraphrase needs n >= 1");
    }
    std::vector<std::string> variants;
    std::set<std::string> seen{text};
    std::optional<std::string> lost;
    for (int round = 0; round < max_rounds_ && static_cast<int>(variants.size()) < n; ++round) {
        json body;
        body["model"] = config_.model_name;
        body["messages"] = json::array(
            {{{"role", "user"}, {"content", paraphrase_instruction(n) + "\n\nInstruction:\n" + text}}});
        body["temperature"] = 1.0;
        body["seed"] = static_cast<std::int64_t>(mix_seed(seed, "round:" + std::to_string(round)) >> 1);
        body["max_tokens"] = config_.max_tokens;

        HttpRequest request{config_.endpoint, {{"Content-Type", "application/json"}}, body.dump()};
        if (!config_.api_key.empty()) {
            request.headers.emplace_back("Authorization", "Bearer " + config_.api_key);
        }
        const auto response = with_retries(config_.retry, sleeper_, seed, [&] {
            auto r = transport_->post(request);
            if (r.status < 200 || r.status >= 300) throw_for_status(r);
            return r;
        });
        const auto doc = json::parse(response.body, nullptr, false);
        if (doc.is_discarded() || !doc.contains("choices") || doc["choices"].empty()) {
            throw TransportError(response.status, false, "malformed paraphrase response");
        }
        const auto& content = doc["choices"][0]["message"]["content"];
        for (auto& item : parse_variant_list(content.is_string() ? content.get<std::string>() : std::string())) {
            if (static_cast<int>(variants.size()) >= n) break;
            if (!placeholders_preserved(text, item)) {
                lost = item;
                continue;
            }
            if (seen.insert(item).second) variants.push_back(std::move(item));
        }
    }
    if (static_cast<int>(variants.size()) < n) {
        if (lost) throw PlaceholderLost(*lost);
        throw RuntimeFailure("remote paraphraser returned too few distinct variants");
    }
    return variants;
}

}  // namespace intent_ape
