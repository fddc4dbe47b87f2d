#include <doctest.h>

#include "oracles.hpp"

#include "vidcap/error.hpp"
#include "vidcap/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace vidcap;
using namespace vidcap::metrics;

namespace {

Tokens tok(const std::string& s) { return text::normalize_and_tokenize(s); }

std::vector<Tokens> random_sentences(std::mt19937_64& eng, std::size_t count, std::size_t words, std::size_t max_len) {
    std::vector<Tokens> out;
    for (std::size_t i = 0; i < count; ++i) {
        Tokens t;
        const std::size_t len = 1 + eng() % max_len;
        for (std::size_t j = 0; j < len; ++j) t.push_back(std::string(1, static_cast<char>('a' + eng() % words)));
        out.push_back(t);
    }
    return out;
}

} // namespace

TEST_CASE("bleu examples") {
    CHECK(bleu4_corpus({tok("a b c d e")}, {{tok("a b c d e")}}) == 100.0);
    CHECK(bleu4_corpus({tok("a b c d")}, {{tok("a b c d e")}}) ==
          doctest::Approx(100.0 * std::exp(1.0 - 5.0 / 4.0)).epsilon(1e-12));
    CHECK(bleu4_corpus({tok("a b c d")}, {{tok("a b c d e")}}) == doctest::Approx(77.88).epsilon(1e-4));
    CHECK(bleu4_corpus({tok("a b c e d")}, {{tok("a b c d e")}}) == 0.0);
    CHECK_THROWS_AS(bleu4_corpus({}, {}), DataError);
}

TEST_CASE("reference length rules") {
    const std::vector<Tokens> refs{tok("a b c"), tok("a b c d e")};
    CHECK(effective_ref_length(4, refs, RefLength::Closest) == 3);
    CHECK(effective_ref_length(5, refs, RefLength::Closest) == 5);
    CHECK(effective_ref_length(5, refs, RefLength::Shortest) == 3);
}

TEST_CASE("rouge examples") {
    CHECK(rouge_l({tok("a b c d")}, {{tok("a b c d")}}) == 100.0);
    const double p = 2.0 / 3.0, r = 1.0, b2 = 1.44;
    CHECK(rouge_l({tok("a b c")}, {{tok("a c")}}) == doctest::Approx(100.0 * (1 + b2) * p * r / (r + b2 * p)).epsilon(1e-12));
    CHECK(rouge_l({tok("a b c")}, {{tok("a c")}}) == doctest::Approx(82.99).epsilon(1e-4));
    CHECK(rouge_l({tok("a b")}, {{tok("c d")}}) == 0.0);
    CHECK(rouge_l_item({}, {tok("a b")}) == 0.0);
    CHECK(lcs_length(tok("a b c d"), tok("b d a")) == 2);
}

TEST_CASE("cider examples") {
    const std::vector<Tokens> preds{tok("one two three four five"), tok("six seven")};
    const References refs{{tok("one two three four five")}, {tok("eight nine ten")}};
    const auto res = cider_d(preds, refs);
    CHECK(res.per_item[0] == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(res.per_item[1] == 0.0);
    CHECK(res.score == doctest::Approx(oracle::cider_d_bruteforce(preds, refs)).epsilon(1e-12));
    CHECK_THROWS_AS(cider_d({}, {}), DataError);
}

TEST_CASE("cider matches the brute-force oracle") {
    std::mt19937_64 eng(99);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t items = 2 + eng() % 4;
        const auto preds = random_sentences(eng, items, 5, 6);
        References refs;
        for (std::size_t i = 0; i < items; ++i) refs.push_back(random_sentences(eng, 1 + eng() % 3, 5, 6));
        CAPTURE(trial);
        CHECK(std::abs(cider_d(preds, refs).score - oracle::cider_d_bruteforce(preds, refs)) < 1e-9);
    }
}

TEST_CASE("cider is order invariant and sigma removes the length penalty") {
    std::mt19937_64 eng(5);
    const auto preds = random_sentences(eng, 5, 4, 7);
    References refs;
    for (int i = 0; i < 5; ++i) refs.push_back(random_sentences(eng, 2, 4, 7));
    const double base = cider_d(preds, refs).score;
    std::vector<Tokens> p2(preds.rbegin(), preds.rend());
    References r2(refs.rbegin(), refs.rend());
    CHECK(cider_d(p2, r2).score == doctest::Approx(base).epsilon(1e-12));
    CHECK(std::abs(cider_d(preds, refs, 4, 1e9).score - oracle::cider_d_bruteforce(preds, refs, 4, 1e300)) < 1e-9);
}

TEST_CASE("self-bleu examples") {
    CHECK(self_bleu({tok("a b c d"), tok("a b c d"), tok("a b c d")}) == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(self_bleu({tok("a b c d"), tok("e f g h")}) <= 1e-5);
    CHECK_THROWS_AS(self_bleu({tok("a")}), DataError);

    // Four-grams are absent from every three-word caption, so only orders 1..3 enter.
    const double eps = 1e-9;
    const double first = std::exp((std::log(2.0 / 3.0) + std::log(0.5) + std::log(eps)) / 3.0);
    const double third = eps;
    const double expected = 100.0 * (2.0 * first + third) / 3.0;
    CHECK(std::abs(self_bleu({tok("a b c"), tok("a b d"), tok("x y z")}) - expected) < 1e-9);
}

TEST_CASE("diversity examples") {
    CHECK(diversity_stats({"a dog runs", "a cat sits"}, {"A dog runs."}, 50).novel_pct == 50.0);
    CHECK(diversity_stats({"a", "a", "b", "c"}, {}, 50).unique_pct == 75.0);
    CHECK(diversity_stats({"one two three", "four five"}, {}, 50).vocab_usage_pct == 10.0);
    CHECK(diversity_stats({"one two three", "four five"}, {}, 3).vocab_usage_pct == 100.0);
    CHECK_THROWS_AS(diversity_stats({"a"}, {}, 0), DataError);
}

TEST_CASE("diversity matches pairwise counting") {
    std::mt19937_64 eng(31);
    for (int trial = 0; trial < 30; ++trial) {
        auto join = [](const Tokens& t) { return text::detokenize(t); };
        std::vector<std::string> preds, train;
        for (const auto& t : random_sentences(eng, 3 + eng() % 8, 3, 3)) preds.push_back(join(t));
        for (const auto& t : random_sentences(eng, 5, 3, 3)) train.push_back(join(t));
        const std::size_t vocab = 2 + eng() % 20;

        std::size_t novel = 0, unique = 0;
        std::vector<std::string> words;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            bool seen = false;
            for (const auto& t : train) seen = seen || t == preds[i];
            novel += seen ? 0 : 1;
            bool earlier = false;
            for (std::size_t j = 0; j < i; ++j) earlier = earlier || preds[j] == preds[i];
            unique += earlier ? 0 : 1;
            for (const auto& w : tok(preds[i])) {
                if (std::find(words.begin(), words.end(), w) == words.end()) words.push_back(w);
            }
        }
        const double n = static_cast<double>(preds.size());
        const auto s = diversity_stats(preds, train, vocab);
        CHECK(s.novel_pct == 100.0 * static_cast<double>(novel) / n);
        CHECK(s.unique_pct == 100.0 * static_cast<double>(unique) / n);
        CHECK(s.vocab_usage_pct ==
              std::min(100.0, 100.0 * static_cast<double>(words.size()) / static_cast<double>(vocab)));
    }
}

TEST_CASE("pos structure histogram") {
    const auto h = pos_structure_histogram({tok("a dog runs"), tok("a cat sits")});
    REQUIRE(h.distinct() == 1);
    CHECK(h.entries[0].first == "DET-NOUN-VERB");
    CHECK(h.entries[0].second == 2);
    const auto e = pos_structure_histogram({Tokens{}});
    CHECK(e.entries[0].first == "");
}

TEST_CASE("evaluation report") {
    const std::vector<std::string> preds{"a red square moves left", "a blue circle moves up"};
    const References refs{{tok("a red square moves left")}, {tok("a blue circle moves up")}};
    const auto r = evaluate_predictions(preds, refs, {"a red square moves left"}, 10);
    CHECK(r.bleu4 == 100.0);
    CHECK(r.rouge_l == 100.0);
    CHECK(r.items == 2);
    CHECK(r.novel_pct == 50.0);
    REQUIRE(r.self_bleu.has_value());
    CHECK_FALSE(r.partial());
    const std::string json = r.to_json();
    CHECK(json.find("\"bleu4\"") != std::string::npos);
    CHECK(json.find("DET-ADJ-NOUN-VERB-ADV") != std::string::npos);
    CHECK(r.to_json(false).find("pos_histogram") == std::string::npos);
}
