#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "test_util.hpp"
#include "vortex/errors.hpp"
#include "vortex/shaper.hpp"

using namespace vortex;
using namespace vortex_test;
using nlohmann::json;

namespace {

struct ContextFixture {
  PromptState prompt;
  std::vector<EpisodeMetrics> history;
  PreferenceSpec pref;
  EnvSummary env;

  ContextFixture() {
    prompt.fixed = "Task: test fixture.";
    pref.kind = DivergenceKind::kKL;
    pref.target.d = {0.5, 0.5};
    env.name = "fixture";
    env.N = 2;
    env.B = 1;
    env.T = 2;
    env.Z = 2;
    env.class_labels = {"group=g0", "group=g1"};
    env.class_counts = {1, 1};
  }

  EpisodeMetrics metrics(std::vector<double> d, double U = 1.0) const {
    EpisodeMetrics m;
    m.U = U;
    m.D.d = std::move(d);
    m.C = divergence(m.D, pref);
    return m;
  }

  ShaperContext ctx(int k) const { return {k, prompt, history, pref, env}; }
};

// Serves canned completion bodies in sequence and counts requests.
class FakeEndpoint {
 public:
  explicit FakeEndpoint(std::vector<std::string> replies)
      : replies_(std::move(replies)) {
    server_.Post("/v1/chat", [this](const httplib::Request& req, httplib::Response& res) {
      last_auth_ = req.get_header_value("Authorization");
      last_body_ = req.body;
      std::size_t i = std::min(calls_.fetch_add(1), replies_.size() - 1);
      json body = {{"choices", json::array({{{"message",
                                              {{"role", "assistant"},
                                               {"content", replies_[i]}}}}})}};
      res.set_content(body.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~FakeEndpoint() {
    server_.stop();
    thread_.join();
  }

  std::string url() const {
    return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat";
  }
  int calls() const { return static_cast<int>(calls_.load()); }
  std::string last_auth() const { return last_auth_; }
  std::string last_body() const { return last_body_; }

 private:
  std::vector<std::string> replies_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<std::size_t> calls_{0};
  std::string last_auth_;
  std::string last_body_;
};

RemoteConfig remote_config(const std::string& url) {
  RemoteConfig cfg;
  cfg.endpoint = url;
  cfg.model = "test-model";
  cfg.backoff_ms = 1;
  cfg.timeout_s = 5;
  return cfg;
}

}  // namespace

TEST_CASE("validation gate enforces completeness, finiteness, and the clamp") {
  CHECK_THROWS_AS(validate_shaping({0.1}, 2, 1.0, false), ProposalError);

  try {
    validate_shaping({0.1, 5.0}, 2, 1.0, false);
    FAIL("expected out-of-range error");
  } catch (const ProposalError& e) {
    CHECK(e.kind() == ProposalFailure::kOutOfRange);
    CHECK(std::string(e.what()).find("class 1") != std::string::npos);
  }

  std::vector<std::string> warnings;
  ShapingReward clamped = validate_shaping({0.1, 99.0}, 2, 1.0, true, &warnings);
  CHECK(clamped.bonus == std::vector<double>{0.1, 1.0});
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("class 1") != std::string::npos);

  CHECK_THROWS_AS(validate_shaping({0.1, std::nan("")}, 2, 1.0, true), ProposalError);
}

TEST_CASE("analytic backend cold-starts at zero") {
  ContextFixture fx;
  AnalyticShaper shaper(AnalyticConfig{}, 2, fx.env.B, fx.env.T);
  ShaperOutput out = shaper.propose(fx.ctx(0));
  CHECK(out.shaping.bonus == std::vector<double>{0.0, 0.0});
  CHECK(out.backend == "analytic");
}

TEST_CASE("analytic backend at lambda 1 proposes zero forever") {
  ContextFixture fx;
  AnalyticConfig cfg;
  cfg.lambda = 1.0;
  AnalyticShaper shaper(cfg, 2, fx.env.B, fx.env.T);
  shaper.propose(fx.ctx(0));
  for (int k = 1; k <= 5; ++k) {
    fx.history.push_back(fx.metrics({0.9, 0.1}));
    ShaperOutput out = shaper.propose(fx.ctx(k));
    CHECK(out.shaping.bonus == std::vector<double>{0.0, 0.0});
  }
}

TEST_CASE("analytic backend with eta0 = 0 never moves") {
  ContextFixture fx;
  AnalyticConfig cfg;
  cfg.eta0 = 0.0;
  AnalyticShaper shaper(cfg, 2, fx.env.B, fx.env.T);
  shaper.propose(fx.ctx(0));
  fx.history.push_back(fx.metrics({1.0, 0.0}));
  ShaperOutput out = shaper.propose(fx.ctx(1));
  CHECK(out.shaping.bonus == std::vector<double>{0.0, 0.0});
}

TEST_CASE("consecutive analytic proposals differ by eta_k times the gradient") {
  ContextFixture fx;
  AnalyticConfig cfg;
  cfg.eta0 = 0.25;
  cfg.r_max = 10.0;  // keep the clamp out of the way
  AnalyticShaper shaper(cfg, 2, fx.env.B, fx.env.T);

  shaper.propose(fx.ctx(0));
  fx.history.push_back(fx.metrics({0.75, 0.25}));
  ShaperOutput r1 = shaper.propose(fx.ctx(1));
  for (int z = 0; z < 2; ++z)
    CHECK(r1.shaping[z] ==
          doctest::Approx(0.25 / 1 * shaper.last_gradient()[z]));

  fx.history.push_back(fx.metrics({0.6, 0.4}));
  ShaperOutput r2 = shaper.propose(fx.ctx(2));
  for (int z = 0; z < 2; ++z)
    CHECK(r2.shaping[z] - r1.shaping[z] ==
          doctest::Approx(0.25 / 2 * shaper.last_gradient()[z]));
}

TEST_CASE("fixed-point mode chases the shaping direction") {
  ContextFixture fx;
  AnalyticConfig cfg;
  cfg.lambda = 0.5;
  cfg.eta0 = 1.0;  // full step: proposal equals the direction, clamped
  AnalyticShaper shaper(cfg, 2, fx.env.B, fx.env.T);
  shaper.propose(fx.ctx(0));
  fx.history.push_back(fx.metrics({0.75, 0.25}));
  ShaperOutput out = shaper.propose(fx.ctx(1));

  ScalarizationConfig scal;
  scal.lambda = 0.5;
  scal.B = fx.env.B;
  scal.T = fx.env.T;
  auto direction = shaping_direction(fx.history[0].D, fx.pref, scal);
  for (int z = 0; z < 2; ++z)
    CHECK(out.shaping[z] == doctest::Approx(clamp_to(direction[z], cfg.r_max)));
  // under-served class ends up above the over-served one
  CHECK(out.shaping[1] > out.shaping[0]);
}

TEST_CASE("raw SA mode composes gradient_estimate with sa_update") {
  ContextFixture fx;
  AnalyticConfig cfg;
  cfg.mode = AnalyticMode::kRawSa;
  cfg.eta0 = 0.1;
  cfg.lambda = 0.5;
  AnalyticShaper shaper(cfg, 2, fx.env.B, fx.env.T);
  shaper.propose(fx.ctx(0));
  fx.history.push_back(fx.metrics({0.75, 0.25}));
  ShaperOutput out = shaper.propose(fx.ctx(1));

  ScalarizationConfig scal;
  scal.lambda = 0.5;
  scal.B = fx.env.B;
  scal.T = fx.env.T;
  scal.eta0 = 0.1;
  GradientEstimate g = gradient_estimate(fx.history[0], fx.pref, scal);
  ShapingReward expected = sa_update(ShapingReward::zeros(2), g, 1, scal);
  CHECK(out.shaping.bonus == expected.bonus);
}

TEST_CASE("scripted backend replays vectors and reports exhaustion") {
  ContextFixture fx;
  ScriptedShaper shaper({{0.1, -0.1}}, 1.0);
  ShaperOutput out = shaper.propose(fx.ctx(0));
  CHECK(out.shaping.bonus == std::vector<double>{0.1, -0.1});

  try {
    shaper.propose(fx.ctx(1));
    FAIL("expected exhaustion");
  } catch (const ProposalError& e) {
    CHECK(e.kind() == ProposalFailure::kExhausted);
  }
}

TEST_CASE("scripted backend rejects vectors that fail the clamp") {
  ContextFixture fx;
  ScriptedShaper shaper({{0.1, 2.5}}, 1.0);
  try {
    shaper.propose(fx.ctx(0));
    FAIL("expected out-of-range error");
  } catch (const ProposalError& e) {
    CHECK(e.kind() == ProposalFailure::kOutOfRange);
    CHECK(std::string(e.what()).find("class 1") != std::string::npos);
  }
}

TEST_CASE("scripted backend loads both accepted file layouts") {
  std::string plain = "/tmp/vortex_script_plain.json";
  {
    std::ofstream out(plain);
    out << "[[0.1, 0.2], [0.3, 0.4]]";
  }
  ScriptedShaper a = ScriptedShaper::from_file(plain, 1.0);
  ContextFixture fx;
  CHECK(a.propose(fx.ctx(1)).shaping.bonus == std::vector<double>{0.3, 0.4});

  std::string wrapped = "/tmp/vortex_script_wrapped.json";
  {
    std::ofstream out(wrapped);
    out << "{\"vectors\": [[0.5, -0.5]]}";
  }
  ScriptedShaper b = ScriptedShaper::from_file(wrapped, 1.0);
  CHECK(b.propose(fx.ctx(0)).shaping.bonus == std::vector<double>{0.5, -0.5});

  CHECK_THROWS_AS(ScriptedShaper::from_file("/nonexistent.json", 1.0), IoError);
}

TEST_CASE("first json object extraction handles prose and nesting") {
  CHECK(extract_first_json_object("here you go: {\"0\": 1} thanks") ==
        "{\"0\": 1}");
  CHECK(extract_first_json_object("{\"a\": {\"b\": 2}} {\"c\": 3}") ==
        "{\"a\": {\"b\": 2}}");
  CHECK(extract_first_json_object("{\"s\": \"braces } inside\", \"x\": 1}") ==
        "{\"s\": \"braces } inside\", \"x\": 1}");
  CHECK_THROWS_AS(extract_first_json_object("no object here"), ProposalError);
}

TEST_CASE("reward object parsing is strict about classes") {
  CHECK(parse_reward_object("{\"0\": 0.3, \"1\": -0.1}", 2) ==
        std::vector<double>{0.3, -0.1});
  try {
    parse_reward_object("{\"0\": 0.3}", 2);
    FAIL("expected incomplete");
  } catch (const ProposalError& e) {
    CHECK(e.kind() == ProposalFailure::kIncomplete);
    CHECK(std::string(e.what()).find("class 1") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_reward_object("{\"7\": 0.3, \"0\": 0.1}", 2), ProposalError);
  CHECK_THROWS_AS(parse_reward_object("{\"0\": \"high\", \"1\": 0.1}", 2),
                  ProposalError);
}

TEST_CASE("remote backend happy path sends auth and parses the vector") {
  setenv("VORTEX_LLM_API_KEY", "sk-test-123", 1);
  FakeEndpoint server({"Sure! {\"0\": 0.3, \"1\": -0.1}"});
  RemoteShaper shaper(remote_config(server.url()));
  ContextFixture fx;
  ShaperOutput out = shaper.propose(fx.ctx(0));
  CHECK(out.shaping.bonus == std::vector<double>{0.3, -0.1});
  CHECK(server.calls() == 1);
  CHECK(server.last_auth() == "Bearer sk-test-123");
  json body = json::parse(server.last_body());
  CHECK(body["model"] == "test-model");
  CHECK(body["messages"][0]["content"].get<std::string>().find("Task:") !=
        std::string::npos);
}

TEST_CASE("remote backend clamps out-of-range values with a warning") {
  setenv("VORTEX_LLM_API_KEY", "sk-test-123", 1);
  FakeEndpoint server({"{\"0\": 99.0, \"1\": 0.0}"});
  RemoteShaper shaper(remote_config(server.url()));
  ContextFixture fx;
  ShaperOutput out = shaper.propose(fx.ctx(0));
  CHECK(out.shaping.bonus == std::vector<double>{1.0, 0.0});
  CHECK(out.rationale.find("clamped") != std::string::npos);
}

TEST_CASE("remote backend re-asks once on a parse failure") {
  setenv("VORTEX_LLM_API_KEY", "sk-test-123", 1);
  FakeEndpoint server({"sorry, no json", "{\"0\": 0.2, \"1\": 0.1}"});
  RemoteShaper shaper(remote_config(server.url()));
  ContextFixture fx;
  ShaperOutput out = shaper.propose(fx.ctx(0));
  CHECK(out.shaping.bonus == std::vector<double>{0.2, 0.1});
  CHECK(server.calls() == 2);
}

TEST_CASE("remote backend gives up after the re-ask") {
  setenv("VORTEX_LLM_API_KEY", "sk-test-123", 1);
  FakeEndpoint server({"still no json", "nothing here either"});
  RemoteShaper shaper(remote_config(server.url()));
  ContextFixture fx;
  try {
    shaper.propose(fx.ctx(0));
    FAIL("expected parse failure");
  } catch (const ProposalError& e) {
    CHECK(e.kind() == ProposalFailure::kParse);
  }
  CHECK(server.calls() == 2);
}

TEST_CASE("remote backend surfaces missing classes without zero-filling") {
  setenv("VORTEX_LLM_API_KEY", "sk-test-123", 1);
  FakeEndpoint server({"{\"0\": 0.2}"});
  RemoteShaper shaper(remote_config(server.url()));
  ContextFixture fx;
  try {
    shaper.propose(fx.ctx(0));
    FAIL("expected incomplete");
  } catch (const ProposalError& e) {
    CHECK(e.kind() == ProposalFailure::kIncomplete);
  }
}

TEST_CASE("remote backend retries transport failures then reports them") {
  setenv("VORTEX_LLM_API_KEY", "sk-test-123", 1);
  RemoteConfig cfg = remote_config("http://127.0.0.1:1/v1/chat");  // closed port
  cfg.max_retries = 2;
  RemoteShaper shaper(cfg);
  ContextFixture fx;
  try {
    shaper.propose(fx.ctx(0));
    FAIL("expected transport failure");
  } catch (const ProposalError& e) {
    CHECK(e.kind() == ProposalFailure::kTransport);
  }
}

TEST_CASE("remote backend requires the credential variable") {
  unsetenv("VORTEX_LLM_API_KEY");
  FakeEndpoint server({"{\"0\": 0.0, \"1\": 0.0}"});
  RemoteShaper shaper(remote_config(server.url()));
  ContextFixture fx;
  CHECK_THROWS_AS(shaper.propose(fx.ctx(0)), ConfigError);
  CHECK(server.calls() == 0);
}
