#include "intent_ape/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "toml.hpp"

namespace intent_ape {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

fs::path default_pool_dir() {
    return fs::path(INTENT_APE_DATA_DIR) / "pools";
}

namespace {

void reject_unknown(const toml::table& table, const std::string& where, const std::set<std::string>& known) {
    for (const auto& [key, node] : table) {
        if (!known.contains(std::string(key.str()))) {
            throw ConfigError("unknown key '" + std::string(key.str()) + "' in [" + where + "]");
        }
    }
}

template <typename T>
T get(const toml::table& table, const char* key, const std::string& where, T fallback) {
    const auto node = table[key];
    if (!node) return fallback;
    auto value = node.value<T>();
    if (!value) throw ConfigError("[" + where + "] " + key + " has the wrong type");
    return *value;
}

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : (base / path).lexically_normal();
}

const toml::table* section(const toml::table& root, const char* name) {
    const auto node = root[name];
    if (!node) return nullptr;
    if (!node.is_table()) throw ConfigError(std::string("[") + name + "] must be a table");
    return node.as_table();
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const fs::path& base) {
    toml::table root;
    try {
        root = toml::parse(text);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << "config parse error: " << e.description() << " (line " << e.source().begin.line << ")";
        throw ConfigError(msg.str());
    }
    reject_unknown(root, "root", {"data", "backend", "paraphraser", "ape", "frames", "output"});

    RunConfig c;
    c.pool_dir = default_pool_dir();

    if (const auto* data = section(root, "data")) {
        reject_unknown(*data, "data", {"manifests", "pools"});
        if (const auto* list = (*data)["manifests"].as_array()) {
            for (const auto& item : *list) {
                const auto s = item.value<std::string>();
                if (!s) throw ConfigError("[data] manifests must be strings");
                c.manifests.push_back(resolve(base, *s));
            }
        } else if ((*data)["manifests"]) {
            throw ConfigError("[data] manifests must be an array");
        }
        if (const auto pools = (*data)["pools"].value<std::string>()) c.pool_dir = resolve(base, *pools);
    }

    if (const auto* b = section(root, "backend")) {
        reject_unknown(*b, "backend",
                       {"kind", "model_name", "endpoint", "supports_logprobs", "max_inflight", "requests_per_second",
                        "temperature", "timeout_s", "role_delivery", "capture_dir", "mock"});
        auto& s = c.backend;
        s.kind = get<std::string>(*b, "kind", "backend", s.kind);
        s.model_name = get<std::string>(*b, "model_name", "backend", s.kind == "mock" ? s.model_name : "");
        s.endpoint = get<std::string>(*b, "endpoint", "backend", s.endpoint);
        s.supports_logprobs = get<bool>(*b, "supports_logprobs", "backend", s.supports_logprobs);
        s.max_inflight = static_cast<int>(get<std::int64_t>(*b, "max_inflight", "backend", s.max_inflight));
        s.requests_per_second = get<double>(*b, "requests_per_second", "backend", s.requests_per_second);
        s.temperature = get<double>(*b, "temperature", "backend", s.temperature);
        s.timeout_s = static_cast<int>(get<std::int64_t>(*b, "timeout_s", "backend", s.timeout_s));
        const auto delivery = get<std::string>(*b, "role_delivery", "backend", "system");
        if (delivery == "system") {
            s.role_delivery = RoleDelivery::SystemMessage;
        } else if (delivery == "prepend") {
            s.role_delivery = RoleDelivery::PrependToUser;
        } else {
            throw ConfigError("[backend] role_delivery must be 'system' or 'prepend'");
        }
        if (const auto capture = (*b)["capture_dir"].value<std::string>()) s.capture_dir = resolve(base, *capture);
        if (const auto* mock = (*b)["mock"].as_table()) {
            reject_unknown(*mock, "backend.mock", {"seed", "bias", "weights"});
            s.mock_seed = static_cast<std::uint64_t>(get<std::int64_t>(*mock, "seed", "backend.mock", 0));
            s.mock_bias = get<double>(*mock, "bias", "backend.mock", s.mock_bias);
            if (const auto* weights = (*mock)["weights"].as_table()) {
                s.mock_weights.clear();
                for (const auto& [term, node] : *weights) {
                    const auto w = node.value<double>();
                    if (!w) throw ConfigError("[backend.mock.weights] values must be numbers");
                    s.mock_weights.push_back({std::string(term.str()), *w});
                }
            }
        }
    }

    if (const auto* p = section(root, "paraphraser")) {
        reject_unknown(*p, "paraphraser", {"kind", "model_name", "endpoint"});
        c.paraphraser.kind = get<std::string>(*p, "kind", "paraphraser", c.paraphraser.kind);
        c.paraphraser.model_name = get<std::string>(*p, "model_name", "paraphraser", "");
        c.paraphraser.endpoint = get<std::string>(*p, "endpoint", "paraphraser", "");
    }

    if (const auto* a = section(root, "ape")) {
        reject_unknown(*a, "ape",
                       {"alpha", "iterations", "top_k", "perturb_per_parent", "eval_samples", "convergence_patience",
                        "convergence_eps", "seed"});
        auto& ape = c.ape;
        ape.alpha = get<double>(*a, "alpha", "ape", ape.alpha);
        ape.iterations = static_cast<int>(get<std::int64_t>(*a, "iterations", "ape", ape.iterations));
        ape.top_k = static_cast<int>(get<std::int64_t>(*a, "top_k", "ape", ape.top_k));
        ape.perturb_per_parent =
            static_cast<int>(get<std::int64_t>(*a, "perturb_per_parent", "ape", ape.perturb_per_parent));
        ape.eval_samples = static_cast<int>(get<std::int64_t>(*a, "eval_samples", "ape", ape.eval_samples));
        ape.convergence_patience =
            static_cast<int>(get<std::int64_t>(*a, "convergence_patience", "ape", ape.convergence_patience));
        ape.convergence_eps = get<double>(*a, "convergence_eps", "ape", ape.convergence_eps);
        ape.seed = static_cast<std::uint64_t>(get<std::int64_t>(*a, "seed", "ape", 0));
    }

    if (const auto* f = section(root, "frames")) {
        reject_unknown(*f, "frames", {"max_edge_px", "stroke_px", "text_scale", "png_compression"});
        c.frames.max_edge_px = static_cast<int>(get<std::int64_t>(*f, "max_edge_px", "frames", c.frames.max_edge_px));
        c.frames.style.stroke_px =
            static_cast<int>(get<std::int64_t>(*f, "stroke_px", "frames", c.frames.style.stroke_px));
        c.frames.style.text_scale = get<double>(*f, "text_scale", "frames", c.frames.style.text_scale);
        c.frames.png_compression =
            static_cast<int>(get<std::int64_t>(*f, "png_compression", "frames", c.frames.png_compression));
    }

    if (const auto* o = section(root, "output")) {
        reject_unknown(*o, "output", {"dir", "run_name"});
        if (const auto dir = (*o)["dir"].value<std::string>()) c.output_dir = resolve(base, *dir);
        c.run_name = get<std::string>(*o, "run_name", "output", "");
    } else {
        c.output_dir = resolve(base, "runs");
    }
    validate(c.ape);
    return c;
}

RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingFile(path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str(), fs::absolute(path).parent_path());
}

void validate(const RunConfig& c) {
    validate(c.ape);
    if (c.backend.kind != "mock" && c.backend.kind != "remote") {
        throw ConfigError("backend kind must be 'mock' or 'remote', got '" + c.backend.kind + "'");
    }
    if (c.paraphraser.kind != "mock" && c.paraphraser.kind != "remote") {
        throw ConfigError("paraphraser kind must be 'mock' or 'remote', got '" + c.paraphraser.kind + "'");
    }
    if (c.backend.kind == "remote" && (c.backend.endpoint.empty() || c.backend.model_name.empty())) {
        throw ConfigError("remote backend needs endpoint and model_name");
    }
    if (c.paraphraser.kind == "remote" && (c.paraphraser.endpoint.empty() || c.paraphraser.model_name.empty())) {
        throw ConfigError("remote paraphraser needs endpoint and model_name");
    }
    if (c.backend.max_inflight < 1 || c.backend.max_inflight > 1024) {
        throw ConfigError("max_inflight must lie in [1, 1024]");
    }
    if (c.replay_dir) {
        if (c.backend.capture_dir) throw ConfigError("replay mode cannot also capture traffic");
        if (!fs::is_directory(*c.replay_dir)) throw MissingFile(*c.replay_dir);
    }
    for (const auto& m : c.manifests) {
        if (!fs::exists(m)) throw MissingFile(m);
    }
    if (!fs::is_directory(c.pool_dir)) throw MissingFile(c.pool_dir);
}

json config_snapshot(const RunConfig& c) {
    json manifests = json::array();
    for (const auto& m : c.manifests) manifests.push_back(m.generic_string());
    json weights = json::object();
    for (const auto& w : c.backend.mock_weights) weights[w.term] = w.weight;
    json backend{{"kind", c.backend.kind},
                 {"model_name", c.backend.model_name},
                 {"endpoint", c.backend.endpoint},
                 {"supports_logprobs", c.backend.supports_logprobs},
                 {"max_inflight", c.backend.max_inflight},
                 {"requests_per_second", c.backend.requests_per_second},
                 {"temperature", c.backend.temperature},
                 {"timeout_s", c.backend.timeout_s},
                 {"role_delivery", c.backend.role_delivery == RoleDelivery::SystemMessage ? "system" : "prepend"},
                 {"capture_dir", c.backend.capture_dir ? c.backend.capture_dir->generic_string() : ""},
                 {"mock", {{"seed", c.backend.mock_seed}, {"bias", c.backend.mock_bias}, {"weights", weights}}}};
    return {{"data", {{"manifests", manifests}, {"pools", c.pool_dir.generic_string()}}},
            {"backend", backend},
            {"paraphraser",
             {{"kind", c.paraphraser.kind}, {"model_name", c.paraphraser.model_name}, {"endpoint", c.paraphraser.endpoint}}},
            {"ape",
             {{"alpha", c.ape.alpha},
              {"iterations", c.ape.iterations},
              {"top_k", c.ape.top_k},
              {"perturb_per_parent", c.ape.perturb_per_parent},
              {"eval_samples", c.ape.eval_samples},
              {"convergence_patience", c.ape.convergence_patience},
              {"convergence_eps", c.ape.convergence_eps},
              {"seed", c.ape.seed}}},
            {"frames",
             {{"max_edge_px", c.frames.max_edge_px},
              {"stroke_px", c.frames.style.stroke_px},
              {"text_scale", c.frames.style.text_scale},
              {"png_compression", c.frames.png_compression}}},
            {"replay_dir", c.replay_dir ? c.replay_dir->generic_string() : ""}};
}

}  // namespace intent_ape
