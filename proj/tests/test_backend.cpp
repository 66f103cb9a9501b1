#include <gtest/gtest.h>

#include <atomic>
#include <fstream>
#include <random>
#include <thread>

#include "fixtures.hpp"
#include "httplib.h"
#include "intent_ape/backend.hpp"
#include "intent_ape/http_transport.hpp"
#include "intent_ape/mock_backend.hpp"
#include "intent_ape/remote_backend.hpp"
#include "json.hpp"

using namespace intent_ape;
using json = nlohmann::json;

namespace {

std::shared_ptr<const VisualPayload> tiny_payload() {
    auto p = std::make_shared<VisualPayload>();
    p->frames.push_back(AnnotatedFrame{{0x89, 'P', 'N', 'G'}, 0, 0.0, 1, 1});
    return p;
}

VisionQuery query(const std::string& user, const std::string& id = "s1") {
    VisionQuery q;
    q.system_text = "sys";
    q.user_text = user;
    q.payload = tiny_payload();
    q.sample_id = id;
    return q;
}

std::string chat_body(const std::string& content, std::optional<std::pair<double, double>> yes_no = std::nullopt,
                      const std::string& answer_token = "YES") {
    json choice{{"message", {{"role", "assistant"}, {"content", content}}}};
    if (yes_no) {
        choice["logprobs"] = {{"content",
                               {{{"token", "Answer"}, {"logprob", -0.01}},
                                {{"token", ":"}, {"logprob", -0.01}},
                                {{"token", " " + answer_token},
                                 {"logprob", std::log(answer_token == "YES" ? yes_no->first : yes_no->second)},
                                 {"top_logprobs",
                                  {{{"token", " YES"}, {"logprob", std::log(yes_no->first)}},
                                   {{"token", " NO"}, {"logprob", std::log(yes_no->second)}},
                                   {{"token", " Maybe"}, {"logprob", -6.0}}}}}}}};
    }
    return json{{"choices", {choice}}}.dump();
}

class ScriptedTransport final : public HttpTransport {
  public:
    std::vector<HttpResponse> script;
    std::vector<HttpRequest> seen;
    HttpResponse post(const HttpRequest& r) override {
        seen.push_back(r);
        const auto i = std::min(seen.size() - 1, script.size() - 1);
        return script[i];
    }
};

RemoteChatConfig remote_config(const std::string& endpoint = "http://127.0.0.1:9/v1/chat/completions") {
    RemoteChatConfig c;
    c.endpoint = endpoint;
    c.model_name = "test-model";
    c.api_key = "secret-key";
    c.retry.base_delay = std::chrono::milliseconds(1);
    return c;
}

}  // namespace

TEST(ParseLabel, AnswerLines) {
    EXPECT_EQ(parse_label("Reasoning...\nAnswer: YES"), Label::Crossing);
    EXPECT_EQ(parse_label("answer: no"), Label::NotCrossing);
    EXPECT_EQ(parse_label("Answer: NO\nlater text\nAnswer: yes."), Label::Crossing);
    EXPECT_EQ(parse_label("Yes"), Label::Crossing);
    EXPECT_EQ(parse_label("The pedestrian will not cross."), Label::NotCrossing);
    EXPECT_EQ(parse_label("The pedestrian will cross."), Label::Crossing);
    EXPECT_THROW((void)parse_label("I cannot tell."), ParseFailure);
    EXPECT_THROW((void)parse_label("yes or no, hard to say"), ParseFailure);
    EXPECT_THROW((void)parse_label(""), ParseFailure);
}

TEST(ParseLabel, FuzzNeverCrashesAndAgreesWithTry) {
    std::mt19937_64 rng(99);
    const std::vector<std::string> pieces{"Answer:", "YES", "NO", "yes", "no", "will", "not", "cross", "\n",
                                          " ",       ".",   "maybe", "Ans", ":", "nope", "yesterday", "\t"};
    for (int i = 0; i < 5000; ++i) {
        std::string text;
        const int len = static_cast<int>(rng() % 12);
        for (int k = 0; k < len; ++k) text += pieces[rng() % pieces.size()];
        if (rng() % 4 == 0) text.push_back(static_cast<char>(rng() % 256));
        const auto maybe = try_parse_label(text);
        if (maybe) {
            EXPECT_EQ(parse_label(text), *maybe) << text;
        } else {
            EXPECT_THROW((void)parse_label(text), ParseFailure) << text;
        }
    }
}

TEST(Mock, PlantedWeightsDriveProbabilities) {
    MockOracleConfig config;
    config.add_sample("c", Label::Crossing, 0.0);
    config.add_sample("n", Label::NotCrossing, 0.0);
    MockOracleBackend backend(config);
    EXPECT_DOUBLE_EQ(keyword_score(config, "nothing relevant"), -1.0);
    EXPECT_DOUBLE_EQ(keyword_score(config, "Posture and POSTURE"), -0.2);
    EXPECT_NEAR(keyword_score(config, "posture, movement; over the past 2 seconds"), 1.8, 1e-12);
    EXPECT_NEAR(keyword_score(config, "the tendency to feel"), -2.8, 1e-12);

    auto qc = query("posture movement", "c");
    auto qn = query("posture movement", "n");
    const auto pc = backend.predict(qc);
    const auto pn = backend.predict(qn);
    EXPECT_NEAR(pc.prob_crossing, logistic(0.6), 1e-12);
    EXPECT_NEAR(pn.prob_crossing, 1.0 - logistic(0.6), 1e-12);
    EXPECT_EQ(pc.label, Label::Crossing);
    EXPECT_EQ(pn.label, Label::NotCrossing);
    EXPECT_EQ(parse_label(pc.raw_text), pc.label);
    // System text is not scored.
    auto sys = qc;
    sys.system_text = "posture movement orientation crosswalk";
    EXPECT_DOUBLE_EQ(backend.predict(sys).prob_crossing, pc.prob_crossing);
}

TEST(Mock, UnknownSampleAndEmptyPayload) {
    MockOracleBackend backend(MockOracleConfig{});
    EXPECT_THROW((void)backend.predict(query("x", "nobody")), ValidationError);
    auto q = query("x");
    q.payload = std::make_shared<VisualPayload>();
    EXPECT_THROW((void)backend.predict(q), ValidationError);
}

TEST(Mock, DerivedDifficultyIsDeterministicAndBounded) {
    for (int i = 0; i < 1000; ++i) {
        const double d = derived_difficulty(3, "s" + std::to_string(i));
        EXPECT_GE(d, -2.0);
        EXPECT_LE(d, 2.0);
        EXPECT_EQ(d, derived_difficulty(3, "s" + std::to_string(i)));
    }
    EXPECT_NE(derived_difficulty(3, "a"), derived_difficulty(4, "a"));
}

TEST(Logprobs, RenormalisesOverYesNo) {
    const auto p = interpret_chat_response(chat_body("Answer: YES", std::pair{0.6, 0.2}), true);
    EXPECT_TRUE(p.has_true_logprobs);
    EXPECT_NEAR(p.prob_crossing, 0.75, 1e-12);
    EXPECT_EQ(p.label, Label::Crossing);
    const auto n = interpret_chat_response(chat_body("Answer: NO", std::pair{0.1, 0.7}, "NO"), true);
    EXPECT_NEAR(n.prob_crossing, 0.125, 1e-12);
    EXPECT_EQ(n.label, Label::NotCrossing);
}

TEST(Logprobs, PseudoConfidenceWithoutLogprobs) {
    const auto yes = interpret_chat_response(chat_body("Answer: YES"), true);
    EXPECT_FALSE(yes.has_true_logprobs);
    EXPECT_EQ(yes.prob_crossing, kPseudoConfidenceCrossing);
    const auto no = interpret_chat_response(chat_body("Answer: NO", std::pair{0.9, 0.1}, "NO"), false);
    EXPECT_FALSE(no.has_true_logprobs);
    EXPECT_EQ(no.prob_crossing, kPseudoConfidenceNotCrossing);
    EXPECT_THROW((void)interpret_chat_response(chat_body("unsure"), true), ParseFailure);
    EXPECT_THROW((void)interpret_chat_response("{}", true), TransportError);
}

TEST(Request, CarriesImagesSystemAndLogprobFlags) {
    auto config = remote_config();
    const auto body = json::parse(build_chat_request(config, query("hello")));
    EXPECT_EQ(body["model"], "test-model");
    EXPECT_EQ(body["messages"][0]["role"], "system");
    EXPECT_EQ(body["messages"][1]["content"][0]["text"], "hello");
    EXPECT_EQ(body["messages"][1]["content"][1]["type"], "image_url");
    EXPECT_EQ(body["logprobs"], true);
    config.supports_logprobs = false;
    EXPECT_FALSE(json::parse(build_chat_request(config, query("hello"))).contains("logprobs"));
}

TEST(Retry, BackoffHonoursRetryAfterAndGivesUp) {
    auto transport = std::make_shared<ScriptedTransport>();
    transport->script = {{429, "", {{"retry-after", "2"}}}, {503, "busy", {}}, {200, chat_body("Answer: NO"), {}}};
    std::vector<std::chrono::milliseconds> sleeps;
    RemoteChatBackend backend(remote_config(), transport, [&](auto d) { sleeps.push_back(d); });
    const auto p = backend.predict(query("q"));
    EXPECT_EQ(p.label, Label::NotCrossing);
    EXPECT_EQ(backend.attempts(), 3);
    ASSERT_EQ(sleeps.size(), 2u);
    EXPECT_GE(sleeps[0], std::chrono::milliseconds(2000));
    EXPECT_EQ(transport->seen[0].headers.back().second, "Bearer secret-key");

    auto failing = std::make_shared<ScriptedTransport>();
    failing->script = {{500, "down", {}}};
    RemoteChatBackend give_up(remote_config(), failing, [](auto) {});
    EXPECT_THROW((void)give_up.predict(query("q")), TransportError);
    EXPECT_EQ(give_up.attempts(), 5);

    auto bad_request = std::make_shared<ScriptedTransport>();
    bad_request->script = {{400, "bad", {}}};
    RemoteChatBackend no_retry(remote_config(), bad_request, [](auto) {});
    EXPECT_THROW((void)no_retry.predict(query("q")), TransportError);
    EXPECT_EQ(no_retry.attempts(), 1);
}

TEST(Retry, BackoffDelayGrowsGeometrically) {
    RetryPolicy policy;
    policy.jitter = 0;
    EXPECT_EQ(backoff_delay(policy, 1, 0), std::chrono::milliseconds(1000));
    EXPECT_EQ(backoff_delay(policy, 3, 0), std::chrono::milliseconds(4000));
    policy.jitter = 0.25;
    const auto d = backoff_delay(policy, 2, 7);
    EXPECT_GE(d, std::chrono::milliseconds(2000));
    EXPECT_LE(d, std::chrono::milliseconds(2500));
}

TEST(Http, LocalServerRateLimitThenSuccess) {
    httplib::Server server;
    std::atomic<int> hits{0};
    std::string auth;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        if (hits.fetch_add(1) == 0) {
            res.status = 429;
            res.set_header("Retry-After", "0");
            return;
        }
        auth = req.get_header_value("Authorization");
        res.set_content(chat_body("Answer: YES", std::pair{0.8, 0.2}), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread thread([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    auto transport = std::make_shared<HttplibTransport>(std::chrono::seconds(5));
    RemoteChatBackend backend(remote_config("http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions"),
                              transport, [](auto) {});
    const auto p = backend.predict(query("q"));
    server.stop();
    thread.join();
    EXPECT_EQ(hits.load(), 2);
    EXPECT_EQ(backend.attempts(), 2);
    EXPECT_NEAR(p.prob_crossing, 0.8, 1e-9);
    EXPECT_EQ(auth, "Bearer secret-key");
}

TEST(Http, UnreachableHostIsTransportError) {
    HttplibTransport transport(std::chrono::seconds(1));
    EXPECT_THROW((void)transport.post({"http://127.0.0.1:1/x", {}, "{}"}), TransportError);
    EXPECT_THROW((void)split_url("not a url"), ConfigError);
    const auto parts = split_url("https://api.example.com:8443/v1/chat?x=1");
    EXPECT_EQ(parts.scheme_host_port, "https://api.example.com:8443");
    EXPECT_EQ(parts.path, "/v1/chat?x=1");
}

TEST(Capture, ReplayServesRecordedExchangesWithoutCredentials) {
    const auto dir = fixtures::scratch_dir("be_capture");
    auto inner = std::make_shared<ScriptedTransport>();
    inner->script = {{200, chat_body("Answer: YES", std::pair{0.7, 0.3}), {}}};
    auto capture = std::make_shared<CaptureTransport>(inner, dir);
    RemoteChatBackend live(remote_config(), capture, [](auto) {});
    const auto recorded = live.predict(query("q"));

    std::size_t files = 0;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        ++files;
        std::ifstream in(entry.path());
        const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        EXPECT_EQ(text.find("secret-key"), std::string::npos);
    }
    EXPECT_EQ(files, 1u);

    auto config = remote_config();
    config.api_key.clear();
    auto replay = std::make_shared<ReplayTransport>(dir);
    RemoteChatBackend offline(config, replay, [](auto) {});
    const auto replayed = offline.predict(query("q"));
    EXPECT_EQ(replayed.prob_crossing, recorded.prob_crossing);
    EXPECT_EQ(replay->served(), 1u);
    EXPECT_THROW((void)offline.predict(query("different")), TransportError);
}

TEST(Gate, CapsInflightRequests) {
    struct Slow final : VisionBackend {
        std::atomic<int> now{0};
        std::atomic<int> peak{0};
        Prediction predict(const VisionQuery&) override {
            const int n = ++now;
            int p = peak.load();
            while (n > p && !peak.compare_exchange_weak(p, n)) {
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
            --now;
            return {};
        }
        BackendDescriptor descriptor() const override {
            BackendDescriptor d;
            d.max_inflight = 2;
            return d;
        }
    };
    auto slow = std::make_shared<Slow>();
    GatedBackend gate(slow);
    std::vector<std::jthread> threads;
    for (int i = 0; i < 8; ++i) threads.emplace_back([&] { (void)gate.predict(query("q")); });
    threads.clear();
    EXPECT_LE(slow->peak.load(), 2);
    EXPECT_LE(gate.peak_inflight(), 2);
}

TEST(Descriptor, IdsDistinguishBackends) {
    BackendDescriptor a;
    BackendDescriptor b = a;
    b.model_name = "other";
    EXPECT_NE(a.id(), b.id());
    BackendDescriptor bad;
    bad.max_inflight = 0;
    EXPECT_THROW(validate(bad), ConfigError);
}
