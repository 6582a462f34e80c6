#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "lightrec/util.hpp"

namespace lightrec {

/// Token vocabulary: specials, the numeric ID tokens "1".."999", and the
/// prompt template words. ID tokens are whole entries and are never split.
struct Vocabulary {
    static constexpr int PAD = 0;
    static constexpr int EOS = 1;
    static constexpr int UNK = 2;

    std::vector<std::string> entries;
    std::unordered_map<std::string, int> ids;
    int accounting_size = 32128;  // vocabulary size used for parameter accounting

    int size() const { return static_cast<int>(entries.size()); }

    int add(const std::string& tok) {
        auto it = ids.find(tok);
        if (it != ids.end()) return it->second;
        int id = size();
        entries.push_back(tok);
        ids.emplace(tok, id);
        return id;
    }

    int id(const std::string& tok) const {
        auto it = ids.find(tok);
        return it == ids.end() ? UNK : it->second;
    }

    /// Vocabulary id of numeric ID token t in [1, 999].
    int number_id(int t) const {
        if (t < 1 || t > 999) throw error("ID token out of range [1, 999]: " + std::to_string(t));
        return 3 + (t - 1);
    }

    static Vocabulary build(const std::string& prompt_template = "recommend items for user") {
        Vocabulary v;
        v.add("<pad>");
        v.add("<eos>");
        v.add("<unk>");
        for (int t = 1; t <= 999; ++t) v.add(std::to_string(t));
        for (const auto& w : split_ws(prompt_template)) v.add(w);
        return v;
    }
};

inline std::vector<int> tokenize(const std::string& text, const Vocabulary& vocab) {
    std::vector<int> out;
    for (const auto& piece : split_ws(text)) out.push_back(vocab.id(piece));
    return out;
}

/// Prompt: the template words followed by the user's collaborative ID tokens.
inline std::vector<int> make_prompt(const std::vector<int>& user_id_tokens, const Vocabulary& vocab,
                                    const std::string& prompt_template = "recommend items for user") {
    std::vector<int> out = tokenize(prompt_template, vocab);
    for (int t : user_id_tokens) out.push_back(vocab.number_id(t));
    return out;
}

/// Target: the item's collaborative ID tokens terminated by EOS.
inline std::vector<int> make_target(const std::vector<int>& item_id_tokens, const Vocabulary& vocab) {
    std::vector<int> out;
    for (int t : item_id_tokens) out.push_back(vocab.number_id(t));
    out.push_back(Vocabulary::EOS);
    return out;
}

}  // namespace lightrec
