#include "testutil.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <memory>
#include <set>

using namespace uqgen;

namespace {

MockModel::Definition coin_def(double p_win = 0.5) {
    MockModel::Definition d;
    d.vocab = {"lose", "win"};
    d.rows["s0"] = {{"win", p_win}, {"lose", 1.0 - p_win}};
    d.prompt_classes = {{"flip*", "s0"}};
    d.max_len = 1;
    return d;
}

Prompt prompt_of(std::string id, std::string text = "") {
    Prompt p;
    p.id = std::move(id);
    p.text = text.empty() ? p.id : std::move(text);
    return p;
}

}  // namespace

TEST(TemperatureScale, HandCase) {
    std::vector<std::pair<std::string, double>> dist{{"a", 0.9}, {"b", 0.1}};
    auto scaled = temperature_scale(dist, 2.0);
    ASSERT_EQ(scaled.size(), 2u);
    EXPECT_NEAR(scaled[0].second, 0.75, 1e-6);
    EXPECT_NEAR(scaled[1].second, 0.25, 1e-6);
}

TEST(TemperatureScale, ZeroIsArgmaxOneHot) {
    std::vector<std::pair<std::string, double>> dist{{"b", 0.5}, {"a", 0.5}};
    auto scaled = temperature_scale(dist, 0.0);
    ASSERT_EQ(scaled.size(), 1u);
    EXPECT_EQ(scaled[0].first, "a");  // lexicographic tie-break
    EXPECT_DOUBLE_EQ(scaled[0].second, 1.0);
    EXPECT_THROW(temperature_scale(dist, -1.0), config_error);
    EXPECT_THROW(temperature_scale({}, 0.5), error);
}

TEST(TemperatureScale, OneIsIdentity) {
    std::vector<std::pair<std::string, double>> dist{{"a", 0.7}, {"b", 0.3}};
    auto scaled = temperature_scale(dist, 1.0);
    EXPECT_NEAR(scaled[0].second, 0.7, 1e-12);
    EXPECT_NEAR(scaled[1].second, 0.3, 1e-12);
}

TEST(MockModel, GreedyChainIsDeterministic) {
    MockModel m = MockModel::from_file(testutil::testdata("mock_twoclass.json"));
    GenRequest req;
    req.prompt = prompt_of("confe_01");
    req.temperature = 0.0;
    Generation g = m.generate(req);
    EXPECT_EQ(g.text, "a b c d e f g h");
    EXPECT_EQ(g.finish_reason, FinishReason::stop);
    ASSERT_EQ(g.steps.size(), 8u);
    for (const TokenStep& s : g.steps) EXPECT_NEAR(s.logprob, std::log(0.97), 1e-12);
    EXPECT_EQ(g.meta.at("detok"), "space");
    EXPECT_TRUE(validate_generation(g).empty()) << validate_generation(g).front();
    // top-k is sorted descending and includes the emitted token
    ASSERT_EQ(g.steps[0].topk.size(), 4u);
    EXPECT_EQ(g.steps[0].topk[0].first, "a");
}

TEST(MockModel, SeededSamplingReproduces) {
    MockModel m = MockModel::from_file(testutil::testdata("mock_twoclass.json"));
    GenRequest req;
    req.prompt = prompt_of("fuzz_01");
    req.temperature = 0.7;
    req.seed = 1234;
    Generation a = m.generate(req), b = m.generate(req);
    EXPECT_EQ(a.text, b.text);
    ASSERT_EQ(a.steps.size(), b.steps.size());
    for (std::size_t i = 0; i < a.steps.size(); ++i)
        EXPECT_EQ(a.steps[i].logprob, b.steps[i].logprob);

    std::set<std::string> texts;
    for (int s = 0; s < 20; ++s) {
        req.seed = s;
        texts.insert(m.generate(req).text);
    }
    EXPECT_GT(texts.size(), 1u);  // fuzzy class actually varies
}

TEST(MockModel, PromptClassFallsBackToTrailingContext) {
    MockModel m = MockModel::from_file(testutil::testdata("mock_twoclass.json"));
    GenRequest req;
    req.prompt = prompt_of("q1", "please continue after h");
    req.temperature = 0.0;
    Generation g = m.generate(req);  // trailing token "h" has a row; greedy -> </s>
    EXPECT_TRUE(g.steps.empty());
    EXPECT_EQ(g.finish_reason, FinishReason::stop);
}

TEST(MockModel, MissingContextUsesUniformFallback) {
    MockModel::Definition d;
    d.vocab = {"x", "y"};
    d.rows["x"] = {{"y", 1.0}};
    d.max_len = 3;
    MockModel m(std::move(d));
    GenRequest req;
    req.prompt = prompt_of("p", "zz");
    req.temperature = 0.0;
    req.topk = 2;
    Generation g = m.generate(req);
    ASSERT_EQ(g.steps.size(), 3u);
    EXPECT_NEAR(g.steps[0].logprob, std::log(0.5), 1e-12);  // uniform over 2 tokens
    EXPECT_EQ(g.steps[0].token, "x");                       // lexicographic argmax tie-break
    EXPECT_EQ(g.meta.at("fallback"), "true");
    EXPECT_EQ(g.steps[1].token, "y");  // row "x" takes over
    EXPECT_NEAR(g.steps[1].logprob, 0.0, 1e-12);
}

TEST(MockModel, ForcedPrefixIsScoredAndContinued) {
    MockModel m = MockModel::from_file(testutil::testdata("mock_twoclass.json"));
    GenRequest req;
    req.prompt = prompt_of("confh_01");
    req.temperature = 0.0;
    req.forced_prefix = {"v"};
    Generation g = m.generate(req);
    ASSERT_GE(g.steps.size(), 2u);
    EXPECT_EQ(g.steps[0].token, "v");
    EXPECT_NEAR(g.steps[0].logprob, std::log(0.2), 1e-12);  // scored from the confh row
    EXPECT_EQ(g.text, "v b c d e f g h");

    req.forced_prefix = {"</s>"};
    Generation h = m.generate(req);
    EXPECT_TRUE(h.steps.empty());
    EXPECT_EQ(h.finish_reason, FinishReason::stop);
}

TEST(MockModel, RespectsMaxTokensAndTopkBounds) {
    MockModel m = MockModel::from_file(testutil::testdata("mock_twoclass.json"));
    GenRequest req;
    req.prompt = prompt_of("fuzz_9");
    req.temperature = 0.7;
    req.seed = 5;
    req.max_tokens = 2;
    Generation g = m.generate(req);
    EXPECT_LE(g.steps.size(), 2u);
    req.topk = 100;
    EXPECT_THROW(m.generate(req), capability_error);
    EXPECT_EQ(m.max_topk(), 18);
}

TEST(MockModel, RejectsBadDefinitions) {
    MockModel::Definition d;
    d.vocab = {"a"};
    d.rows["a"] = {{"a", 0.5}};  // does not sum to 1
    EXPECT_THROW(MockModel(std::move(d)), data_error);
    MockModel::Definition e;
    EXPECT_THROW(MockModel(std::move(e)), data_error);  // empty vocab
}

TEST(MockModel, SamplingFrequencyMatchesRow) {
    MockModel m(coin_def(0.7));
    int wins = 0;
    GenRequest req;
    req.prompt = prompt_of("flip");
    req.temperature = 1.0;
    req.topk = 2;
    for (int i = 0; i < 10000; ++i) {
        req.seed = i;
        Generation g = m.generate(req);
        ASSERT_EQ(g.steps.size(), 1u);
        if (g.steps[0].token == "win") ++wins;
    }
    double freq = wins / 10000.0;
    EXPECT_GE(freq, 0.68);
    EXPECT_LE(freq, 0.72);
}

TEST(MockModel, SampledRunsAreDiverse) {
    MockModel m(coin_def(0.5));
    int diverse = 0;
    GenRequest req;
    req.temperature = 0.7;
    req.topk = 2;
    for (int p = 0; p < 100; ++p) {
        req.prompt = prompt_of("flip_" + std::to_string(p));
        std::set<std::string> seen;
        auto seeds = derive_seeds(splitmix64(static_cast<std::uint64_t>(p)), 5);
        for (std::uint64_t s : seeds) {
            req.seed = static_cast<std::int64_t>(s);
            seen.insert(m.generate(req).text);
        }
        if (seen.size() >= 2) ++diverse;
    }
    // P(>=2 distinct of 5 fair-coin draws) = 15/16; 85 of 100 is a ~3.5-sigma floor
    EXPECT_GE(diverse, 85);
}

TEST(CachedGenerator, HitsSkipsAndCorruption) {
    auto dir = testutil::make_tmpdir("cache");
    std::string path = (dir / "gen_cache.jsonl").string();
    auto inner = std::make_shared<MockModel>(
            MockModel::from_file(testutil::testdata("mock_twoclass.json")));

    GenRequest greedy;
    greedy.prompt = prompt_of("confe_01");
    greedy.temperature = 0.0;

    GenRequest sampled = greedy;
    sampled.temperature = 0.7;

    {
        CachedGenerator cache(inner, path);
        Generation g1 = cache.generate(greedy);
        EXPECT_EQ(cache.misses(), 1u);
        Generation g2 = cache.generate(greedy);
        EXPECT_EQ(cache.hits(), 1u);
        EXPECT_EQ(g2.meta.at("cache"), "hit");
        EXPECT_EQ(g1.text, g2.text);

        // unseeded sampling bypasses the cache
        Generation g3 = cache.generate(sampled);
        EXPECT_EQ(g3.meta.at("cache"), "skipped");
        EXPECT_EQ(cache.misses(), 1u);

        // seeded sampling is cacheable
        sampled.seed = 77;
        Generation g4 = cache.generate(sampled);
        EXPECT_EQ(cache.misses(), 2u);
        Generation g5 = cache.generate(sampled);
        EXPECT_EQ(g5.meta.at("cache"), "hit");
        EXPECT_EQ(g4.text, g5.text);

        // changed request parameters are distinct keys
        GenRequest other = greedy;
        other.max_tokens = 3;
        EXPECT_NE(cache.cache_key(greedy), cache.cache_key(other));
        EXPECT_NE(cache.cache_key(greedy), cache.cache_key(sampled));
    }

    // fresh instance reuses the stored answers
    {
        CachedGenerator cache(inner, path);
        cache.generate(greedy);
        EXPECT_EQ(cache.hits(), 1u);
        EXPECT_EQ(cache.misses(), 0u);
    }

    // rebuild the sidecar index from the JSONL
    std::filesystem::remove(path + ".idx");
    {
        CachedGenerator cache(inner, path);
        cache.generate(greedy);
        EXPECT_EQ(cache.hits(), 1u);
        EXPECT_TRUE(std::filesystem::exists(path + ".idx"));
    }

    // corrupt record: warn, treat as miss, regenerate
    {
        std::string body = testutil::slurp(path);
        auto nl = body.find('\n');
        for (std::size_t i = 0; i < nl; ++i) body[i] = 'x';
        testutil::spit(path, body);
        CachedGenerator cache(inner, path);
        Generation g = cache.generate(greedy);
        EXPECT_EQ(cache.misses(), 1u);
        EXPECT_EQ(g.text, "a b c d e f g h");
    }
    std::filesystem::remove_all(dir);
}
