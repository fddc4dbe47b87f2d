#pragma once

#include "vidcap/tensor.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace vidcap::text {

using Tokens = std::vector<std::string>;

/// Lowercase, drop punctuation (apostrophes survive between letters/digits), split on whitespace.
Tokens normalize_and_tokenize(std::string_view text);
std::string detokenize(const Tokens& tokens);
/// normalize_and_tokenize followed by detokenize.
std::string normalize(std::string_view text);

enum class Split { Train, Val, Test };
Split parse_split(std::string_view s);
std::string_view split_name(Split s);

struct CaptionRecord {
    std::string id;
    std::string video; ///< path relative to the corpus file
    std::vector<std::string> captions;
    std::vector<Tokens> tokens; ///< normalized tokens per caption
    Split split = Split::Train;
};

/// Parses one JSON-lines record, tokenizing its captions.
CaptionRecord parse_record(std::string_view json_line);
std::string record_to_json(const CaptionRecord& record);
std::vector<CaptionRecord> read_corpus(const std::filesystem::path& path);
void write_corpus(const std::filesystem::path& path, const std::vector<CaptionRecord>& records);
std::vector<CaptionRecord> filter_split(const std::vector<CaptionRecord>& records, Split split);

class Vocab {
public:
    static constexpr int kPad = 0;
    static constexpr int kSos = 1;
    static constexpr int kEos = 2;
    static constexpr int kUnk = 3;

    Vocab();
    /// `words` excludes the four reserved tokens.
    explicit Vocab(const std::vector<std::string>& words);

    int id(const std::string& word) const;
    const std::string& word(int id) const;
    std::size_t size() const noexcept { return tokens_.size(); }
    /// All surface forms in id order, reserved tokens first.
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }

    bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

/// Training-split words with count >= min_freq, ordered by (count desc, word asc).
Vocab build_vocab(const std::vector<CaptionRecord>& corpus, std::size_t min_freq);

enum class Pos { Noun, Verb, Adv, Adj, Det, Pron, Prep, Other };
std::string_view pos_name(Pos p);
Pos parse_pos(std::string_view s);

/// Context-free tagger: lexicon lookup, then suffix rules, then NOUN.
class PosLexicon {
public:
    /// Parses word<TAB>tag lines; '#' starts a comment line.
    explicit PosLexicon(std::string_view tsv);
    /// The lexicon shipped with the library.
    static const PosLexicon& builtin();

    std::optional<Pos> lookup(const std::string& word) const;
    Pos tag(const std::string& word) const;
    std::size_t size() const noexcept { return entries_.size(); }

private:
    bool is_verb_stem(const std::string& stem) const;
    std::unordered_map<std::string, Pos> entries_;
};

std::vector<Pos> pos_tag(const Tokens& tokens, const PosLexicon& lexicon = PosLexicon::builtin());

struct ConceptVocabulary {
    std::vector<std::string> words;
    std::vector<std::size_t> counts;

    std::size_t size() const noexcept { return words.size(); }
    bool operator==(const ConceptVocabulary&) const = default;
};

/// The K most frequent NOUN/VERB/ADV tokens of the training captions.
ConceptVocabulary build_concept_vocabulary(const std::vector<CaptionRecord>& corpus, std::size_t k,
                                           const PosLexicon& lexicon = PosLexicon::builtin());

struct ConceptLabels {
    std::vector<std::uint8_t> bits;
    Tensor as_tensor() const;
};

/// L_k = 1 iff concept word k occurs in any of the record's captions.
ConceptLabels concept_label_vector(const CaptionRecord& record, const ConceptVocabulary& cv);

struct EncodedCaption {
    std::vector<int> ids;           ///< max_len + 1 entries
    std::vector<std::uint8_t> mask; ///< 1 for words and EOS, 0 for padding
    std::size_t length() const;     ///< number of word ids before EOS
};

EncodedCaption encode_caption(const Tokens& tokens, const Vocab& vocab, std::size_t max_len = 20);
/// Maps ids back to words, stopping at EOS and skipping PAD/SOS.
Tokens decode_ids(const std::vector<int>& ids, const Vocab& vocab);

/// vocab.json: {"vocab": [...], "concepts": [...], "concept_counts": [...]}.
void save_vocab_file(const std::filesystem::path& path, const Vocab& vocab, const ConceptVocabulary& concepts);
std::pair<Vocab, ConceptVocabulary> load_vocab_file(const std::filesystem::path& path);

} // namespace vidcap::text
