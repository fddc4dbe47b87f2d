#include "vidcap/textproc.hpp"

#include "vidcap/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace vidcap::text {

std::string_view builtin_pos_lexicon_tsv(); // generated from data/pos_lexicon.tsv

namespace {

bool is_word_char(unsigned char c) { return std::isalnum(c) != 0; }

} // namespace

Tokens normalize_and_tokenize(std::string_view text) {
    std::string cleaned;
    cleaned.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (is_word_char(c)) {
            cleaned.push_back(static_cast<char>(std::tolower(c)));
        } else if (c == '\'' && i > 0 && i + 1 < text.size() && is_word_char(static_cast<unsigned char>(text[i - 1])) &&
                   is_word_char(static_cast<unsigned char>(text[i + 1]))) {
            cleaned.push_back('\'');
        } else {
            cleaned.push_back(' ');
        }
    }
    Tokens out;
    std::istringstream is(cleaned);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

std::string detokenize(const Tokens& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

std::string normalize(std::string_view text) { return detokenize(normalize_and_tokenize(text)); }

Split parse_split(std::string_view s) {
    if (s == "train") return Split::Train;
    if (s == "val") return Split::Val;
    if (s == "test") return Split::Test;
    throw DataError("unknown split '" + std::string(s) + "'");
}

std::string_view split_name(Split s) {
    switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    }
    return "train";
}

CaptionRecord parse_record(std::string_view json_line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_line);
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(std::string("corpus: malformed JSON line: ") + e.what());
    }
    CaptionRecord r;
    try {
        r.id = j.at("id").get<std::string>();
        r.video = j.at("video").get<std::string>();
        r.captions = j.at("captions").get<std::vector<std::string>>();
        r.split = parse_split(j.value("split", std::string("train")));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("corpus: bad record: ") + e.what());
    }
    if (r.captions.empty()) throw DataError("corpus: record '" + r.id + "' has no captions");
    for (const auto& c : r.captions) r.tokens.push_back(normalize_and_tokenize(c));
    return r;
}

std::string record_to_json(const CaptionRecord& r) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["video"] = r.video;
    j["captions"] = r.captions;
    j["split"] = std::string(split_name(r.split));
    return j.dump();
}

std::vector<CaptionRecord> read_corpus(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open corpus " + path.string());
    std::vector<CaptionRecord> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        out.push_back(parse_record(line));
    }
    return out;
}

void write_corpus(const std::filesystem::path& path, const std::vector<CaptionRecord>& records) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw DataError("cannot write corpus " + path.string());
    for (const auto& r : records) os << record_to_json(r) << '\n';
}

std::vector<CaptionRecord> filter_split(const std::vector<CaptionRecord>& records, Split split) {
    std::vector<CaptionRecord> out;
    std::copy_if(records.begin(), records.end(), std::back_inserter(out),
                 [split](const CaptionRecord& r) { return r.split == split; });
    return out;
}

Vocab::Vocab() : Vocab(std::vector<std::string>{}) {}

Vocab::Vocab(const std::vector<std::string>& words) {
    tokens_ = {"<pad>", "<sos>", "<eos>", "<unk>"};
    tokens_.insert(tokens_.end(), words.begin(), words.end());
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (!index_.emplace(tokens_[i], static_cast<int>(i)).second) {
            throw DataError("vocab: duplicate token '" + tokens_[i] + "'");
        }
    }
}

int Vocab::id(const std::string& word) const {
    auto it = index_.find(word);
    return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocab::word(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) throw std::out_of_range("vocab: id out of range");
    return tokens_[static_cast<std::size_t>(id)];
}

namespace {

// (count desc, word asc)
std::vector<std::pair<std::string, std::size_t>> ranked(const std::map<std::string, std::size_t>& counts) {
    std::vector<std::pair<std::string, std::size_t>> out(counts.begin(), counts.end());
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    return out;
}

} // namespace

Vocab build_vocab(const std::vector<CaptionRecord>& corpus, std::size_t min_freq) {
    std::map<std::string, std::size_t> counts;
    bool any = false;
    for (const auto& r : corpus) {
        if (r.split != Split::Train) continue;
        any = true;
        for (const auto& toks : r.tokens)
            for (const auto& t : toks) ++counts[t];
    }
    if (!any) throw DataError("build_vocab: empty training split");
    std::vector<std::string> words;
    for (const auto& [w, c] : ranked(counts)) {
        if (c >= min_freq) words.push_back(w);
    }
    return Vocab(words);
}

std::string_view pos_name(Pos p) {
    switch (p) {
    case Pos::Noun: return "NOUN";
    case Pos::Verb: return "VERB";
    case Pos::Adv: return "ADV";
    case Pos::Adj: return "ADJ";
    case Pos::Det: return "DET";
    case Pos::Pron: return "PRON";
    case Pos::Prep: return "PREP";
    case Pos::Other: return "OTHER";
    }
    return "OTHER";
}

Pos parse_pos(std::string_view s) {
    for (Pos p : {Pos::Noun, Pos::Verb, Pos::Adv, Pos::Adj, Pos::Det, Pos::Pron, Pos::Prep, Pos::Other}) {
        if (pos_name(p) == s) return p;
    }
    throw DataError("unknown POS tag '" + std::string(s) + "'");
}

PosLexicon::PosLexicon(std::string_view tsv) {
    std::istringstream is{std::string(tsv)};
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw DataError("pos lexicon: missing tab in line '" + line + "'");
        entries_[line.substr(0, tab)] = parse_pos(line.substr(tab + 1));
    }
}

const PosLexicon& PosLexicon::builtin() {
    static const PosLexicon lexicon(builtin_pos_lexicon_tsv());
    return lexicon;
}

std::optional<Pos> PosLexicon::lookup(const std::string& word) const {
    auto it = entries_.find(word);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

bool PosLexicon::is_verb_stem(const std::string& stem) const {
    auto p = lookup(stem);
    return p && *p == Pos::Verb;
}

Pos PosLexicon::tag(const std::string& word) const {
    if (auto p = lookup(word)) return *p;
    auto ends_with = [&](std::string_view suffix) {
        return word.size() > suffix.size() && word.compare(word.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    if (ends_with("ly")) return Pos::Adv;
    std::vector<std::string> stems;
    auto add_stems = [&](std::size_t cut) {
        std::string stem = word.substr(0, word.size() - cut);
        stems.push_back(stem);
        stems.push_back(stem + "e");
        if (stem.size() >= 2 && stem.back() == stem[stem.size() - 2]) stems.push_back(stem.substr(0, stem.size() - 1));
        if (!stem.empty() && stem.back() == 'i') stems.push_back(stem.substr(0, stem.size() - 1) + "y");
    };
    if (ends_with("ing")) add_stems(3);
    if (ends_with("ed")) add_stems(2);
    if (ends_with("es")) add_stems(2);
    if (ends_with("s")) add_stems(1);
    for (const auto& s : stems) {
        if (is_verb_stem(s)) return Pos::Verb;
    }
    return Pos::Noun;
}

std::vector<Pos> pos_tag(const Tokens& tokens, const PosLexicon& lexicon) {
    std::vector<Pos> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(lexicon.tag(t));
    return out;
}

ConceptVocabulary build_concept_vocabulary(const std::vector<CaptionRecord>& corpus, std::size_t k,
                                           const PosLexicon& lexicon) {
    if (k < 1) throw ConfigError("concept vocabulary: K must be >= 1");
    std::map<std::string, std::size_t> counts;
    bool any = false;
    for (const auto& r : corpus) {
        if (r.split != Split::Train) continue;
        any = true;
        for (const auto& toks : r.tokens) {
            for (const auto& t : toks) {
                const Pos p = lexicon.tag(t);
                if (p == Pos::Noun || p == Pos::Verb || p == Pos::Adv) ++counts[t];
            }
        }
    }
    if (!any) throw DataError("concept vocabulary: empty training split");
    const auto order = ranked(counts);
    if (order.size() < k) {
        throw DataError("concept vocabulary underflow: " + std::to_string(order.size()) + " candidates for K=" +
                        std::to_string(k));
    }
    ConceptVocabulary cv;
    for (std::size_t i = 0; i < k; ++i) {
        cv.words.push_back(order[i].first);
        cv.counts.push_back(order[i].second);
    }
    return cv;
}

Tensor ConceptLabels::as_tensor() const {
    Tensor t({bits.size()});
    for (std::size_t i = 0; i < bits.size(); ++i) t[i] = bits[i];
    return t;
}

ConceptLabels concept_label_vector(const CaptionRecord& record, const ConceptVocabulary& cv) {
    std::set<std::string> present;
    for (const auto& toks : record.tokens) present.insert(toks.begin(), toks.end());
    ConceptLabels labels;
    labels.bits.reserve(cv.size());
    for (const auto& w : cv.words) labels.bits.push_back(present.count(w) ? 1 : 0);
    return labels;
}

std::size_t EncodedCaption::length() const {
    return static_cast<std::size_t>(std::find(ids.begin(), ids.end(), Vocab::kEos) - ids.begin());
}

EncodedCaption encode_caption(const Tokens& tokens, const Vocab& vocab, std::size_t max_len) {
    EncodedCaption enc;
    enc.ids.assign(max_len + 1, Vocab::kPad);
    enc.mask.assign(max_len + 1, 0);
    const std::size_t n = std::min(tokens.size(), max_len);
    for (std::size_t i = 0; i < n; ++i) {
        enc.ids[i] = vocab.id(tokens[i]);
        enc.mask[i] = 1;
    }
    enc.ids[n] = Vocab::kEos;
    enc.mask[n] = 1;
    return enc;
}

Tokens decode_ids(const std::vector<int>& ids, const Vocab& vocab) {
    Tokens out;
    for (int id : ids) {
        if (id == Vocab::kEos) break;
        if (id == Vocab::kPad || id == Vocab::kSos) continue;
        out.push_back(vocab.word(id));
    }
    return out;
}

void save_vocab_file(const std::filesystem::path& path, const Vocab& vocab, const ConceptVocabulary& concepts) {
    nlohmann::ordered_json j;
    j["vocab"] = vocab.tokens();
    j["concepts"] = concepts.words;
    j["concept_counts"] = concepts.counts;
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw DataError("cannot write vocab file " + path.string());
    os << j.dump(1) << '\n';
}

std::pair<Vocab, ConceptVocabulary> load_vocab_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open vocab file " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(is);
        auto tokens = j.at("vocab").get<std::vector<std::string>>();
        if (tokens.size() < 4 || tokens[0] != "<pad>" || tokens[1] != "<sos>" || tokens[2] != "<eos>" ||
            tokens[3] != "<unk>") {
            throw DataError("vocab file: reserved tokens missing");
        }
        ConceptVocabulary cv;
        cv.words = j.at("concepts").get<std::vector<std::string>>();
        cv.counts = j.at("concept_counts").get<std::vector<std::size_t>>();
        return {Vocab(std::vector<std::string>(tokens.begin() + 4, tokens.end())), cv};
    } catch (const nlohmann::json::exception& e) {
        throw DataError("vocab file " + path.string() + ": " + e.what());
    }
}

} // namespace vidcap::text
