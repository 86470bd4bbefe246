#include <algorithm>
#include <cctype>
#include <set>

#include "moce/data.hpp"
#include "moce/errors.hpp"

namespace moce::data {

std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> out;
    std::string word;
    auto flush = [&] {
        if (!word.empty()) out.push_back(std::move(word));
        word.clear();
    };
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            flush();
        } else if (std::ispunct(c) && c != '\'') {
            flush();
            out.emplace_back(1, static_cast<char>(c));
        } else {
            word += static_cast<char>(std::tolower(c));
        }
    }
    flush();
    return out;
}

Vocabulary::Vocabulary() : words_{kUnkToken} {}

Vocabulary Vocabulary::build(const std::vector<Example>& examples) {
    std::set<std::string> words;
    for (const auto& ex : examples) {
        for (auto& w : split_words(ex.text)) words.insert(std::move(w));
    }
    words.erase(kUnkToken);
    Vocabulary v;
    v.words_.insert(v.words_.end(), words.begin(), words.end());
    return v;
}

Vocabulary Vocabulary::from_words(std::vector<std::string> words) {
    if (words.empty() || words.front() != kUnkToken) {
        throw ParseError("vocabulary must start with " + std::string(kUnkToken));
    }
    if (!std::is_sorted(words.begin() + 1, words.end()) ||
        std::adjacent_find(words.begin() + 1, words.end()) != words.end()) {
        throw ParseError("vocabulary words must be sorted and unique");
    }
    Vocabulary v;
    v.words_ = std::move(words);
    return v;
}

std::size_t Vocabulary::index(const std::string& word) const {
    const auto it = std::lower_bound(words_.begin() + 1, words_.end(), word);
    if (it == words_.end() || *it != word) return kUnk;
    return static_cast<std::size_t>(it - words_.begin());
}

model::TokenSeq tokenize(const std::string& text, const Vocabulary& vocab, std::size_t max_len) {
    model::TokenSeq out;
    for (const auto& w : split_words(text)) {
        if (out.size() >= max_len) break;
        out.push_back(vocab.index(w));
    }
    if (out.empty()) out.push_back(Vocabulary::kUnk);
    return out;
}

void assign_tokens(DatasetSplit& split, const Vocabulary& vocab, std::size_t max_len) {
    for (auto* part : {&split.train, &split.dev, &split.test}) {
        for (auto& ex : *part) ex.tokens = tokenize(ex.text, vocab, max_len);
    }
}

double vocabulary_coverage(const std::vector<Example>& examples, const Vocabulary& vocab) {
    std::size_t known = 0, total = 0;
    for (const auto& ex : examples) {
        for (const auto& w : split_words(ex.text)) {
            ++total;
            known += vocab.index(w) != Vocabulary::kUnk;
        }
    }
    return total == 0 ? 1.0 : static_cast<double>(known) / static_cast<double>(total);
}

}  // namespace moce::data
