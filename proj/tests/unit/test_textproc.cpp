#include <doctest.h>

#include "vidcap/error.hpp"
#include "vidcap/textproc.hpp"

#include <filesystem>

using namespace vidcap;
using namespace vidcap::text;

namespace {

CaptionRecord record(std::vector<std::string> captions, Split split = Split::Train) {
    CaptionRecord r;
    r.id = "v";
    r.video = "v.vvid";
    r.split = split;
    for (const auto& c : captions) r.tokens.push_back(normalize_and_tokenize(c));
    r.captions = std::move(captions);
    return r;
}

} // namespace

TEST_CASE("tokenizer examples") {
    CHECK(normalize_and_tokenize("A Dog runs.") == Tokens{"a", "dog", "runs"});
    CHECK(normalize_and_tokenize("dog's tail") == Tokens{"dog's", "tail"});
    CHECK(normalize_and_tokenize("").empty());
    CHECK(normalize_and_tokenize("  'quoted'  words, here!") == Tokens{"quoted", "words", "here"});
    CHECK(normalize("The  Cat\tSAT") == "the cat sat");
}

TEST_CASE("vocabulary ordering and frequency cut") {
    const std::vector<CaptionRecord> corpus{record({"a dog"}), record({"a cat"})};
    const Vocab v = build_vocab(corpus, 1);
    CHECK(v.tokens() == std::vector<std::string>{"<pad>", "<sos>", "<eos>", "<unk>", "a", "cat", "dog"});
    CHECK(v.id("dog") == 6);
    CHECK(v.id("zebra") == Vocab::kUnk);
    const Vocab only = build_vocab(corpus, 2);
    CHECK(only.size() == 5);
    CHECK(only.word(4) == "a");

    std::vector<CaptionRecord> held_out{record({"a dog"}, Split::Val)};
    CHECK_THROWS_AS(build_vocab(held_out, 1), DataError);
}

TEST_CASE("vocabulary only counts the training split") {
    const std::vector<CaptionRecord> corpus{record({"a dog"}), record({"zebra zebra"}, Split::Test)};
    CHECK(build_vocab(corpus, 1).id("zebra") == Vocab::kUnk);
}

TEST_CASE("vocab file round trip") {
    const std::vector<CaptionRecord> corpus{record({"a dog runs", "a dog sleeps", "a cat runs"})};
    const Vocab v = build_vocab(corpus, 1);
    const ConceptVocabulary cv = build_concept_vocabulary(corpus, 2);
    const auto path = std::filesystem::temp_directory_path() / "vidcap_unit_vocab.json";
    save_vocab_file(path, v, cv);
    const auto [v2, cv2] = load_vocab_file(path);
    CHECK(v2 == v);
    CHECK(cv2 == cv);
    std::filesystem::remove(path);
}

TEST_CASE("part of speech tagging") {
    CHECK(pos_tag({"a", "dog", "runs", "quickly"}) == std::vector<Pos>{Pos::Det, Pos::Noun, Pos::Verb, Pos::Adv});
    CHECK(pos_tag({"blorp"}) == std::vector<Pos>{Pos::Noun});
    const PosLexicon& lex = PosLexicon::builtin();
    CHECK(lex.size() > 100);
    CHECK(lex.tag("moves") == Pos::Verb);
    CHECK(lex.tag("sliding") == Pos::Verb);
    CHECK(lex.tag("slowly") == Pos::Adv);
    CHECK(lex.tag("the") == Pos::Det);

    const PosLexicon custom("# comment\nzorp\tVERB\n");
    CHECK(custom.tag("zorp") == Pos::Verb);
    CHECK(custom.tag("zorping") == Pos::Verb);
    CHECK(custom.tag("zorped") == Pos::Verb);
    CHECK(custom.tag("glorp") == Pos::Noun);
    CHECK(pos_name(Pos::Det) == "DET");
    CHECK(parse_pos("ADV") == Pos::Adv);
}

TEST_CASE("concept vocabulary examples") {
    const std::vector<CaptionRecord> corpus{record({"a dog runs", "a dog sleeps", "a cat runs"})};
    const auto two = build_concept_vocabulary(corpus, 2);
    CHECK(two.words == std::vector<std::string>{"dog", "runs"});
    CHECK(two.counts == std::vector<std::size_t>{2, 2});
    const auto four = build_concept_vocabulary(corpus, 4);
    CHECK(four.words == std::vector<std::string>{"dog", "runs", "cat", "sleeps"});

    const std::vector<CaptionRecord> dets{record({"a the an"})};
    CHECK_THROWS_WITH(build_concept_vocabulary(dets, 1), doctest::Contains("concept vocabulary underflow"));
}

TEST_CASE("concept label vectors") {
    ConceptVocabulary cv{{"dog", "runs", "cat"}, {1, 1, 1}};
    CHECK(concept_label_vector(record({"a dog runs"}), cv).bits == std::vector<std::uint8_t>{1, 1, 0});
    CHECK(concept_label_vector(record({""}), cv).bits == std::vector<std::uint8_t>{0, 0, 0});
    const auto any = concept_label_vector(record({"one", "two", "three", "a cat", "five"}), cv);
    CHECK(any.bits == std::vector<std::uint8_t>{0, 0, 1});
    CHECK(any.as_tensor().shape() == Shape{3});
    CHECK(any.as_tensor()[2] == 1.0);
}

TEST_CASE("caption encoding") {
    const std::vector<CaptionRecord> corpus{record({"a dog"})};
    const Vocab v = build_vocab(corpus, 1);
    const auto enc = encode_caption({"a", "dog"}, v, 20);
    REQUIRE(enc.ids.size() == 21);
    CHECK(enc.ids[0] == v.id("a"));
    CHECK(enc.ids[1] == v.id("dog"));
    CHECK(enc.ids[2] == Vocab::kEos);
    for (std::size_t i = 3; i < 21; ++i) CHECK(enc.ids[i] == Vocab::kPad);
    CHECK(enc.length() == 2);
    CHECK(enc.mask[2] == 1);
    CHECK(enc.mask[3] == 0);

    const auto long_enc = encode_caption(Tokens(25, "dog"), v, 20);
    CHECK(long_enc.length() == 20);
    CHECK(long_enc.ids[20] == Vocab::kEos);

    CHECK(encode_caption({"a", "zebra"}, v).ids[1] == Vocab::kUnk);
    CHECK(decode_ids({Vocab::kSos, v.id("a"), v.id("dog"), Vocab::kEos, v.id("a")}, v) == Tokens{"a", "dog"});
}

TEST_CASE("corpus records parse and serialize") {
    const auto r = parse_record(R"({"id":"vid0001","video":"videos/vid0001.vvid","captions":["A red square."],"split":"val"})");
    CHECK(r.id == "vid0001");
    CHECK(r.split == Split::Val);
    CHECK(r.tokens[0] == Tokens{"a", "red", "square"});
    const auto again = parse_record(record_to_json(r));
    CHECK(again.captions == r.captions);
    CHECK(again.video == r.video);
    CHECK_THROWS_AS(parse_record("{not json"), DataError);
    CHECK_THROWS_AS(parse_record(R"({"id":"x","video":"v","captions":[],"split":"train"})"), DataError);
}
