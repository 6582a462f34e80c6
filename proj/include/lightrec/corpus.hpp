#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "lightrec/util.hpp"

namespace lightrec {

struct InteractionRecord {
    int user = -1;
    int item = -1;
    std::int64_t timestamp = 0;
};

/// Interaction corpus: dense user/item vocabularies plus the raw records.
/// Vocabulary indices are assigned in first-appearance order.
struct InteractionLog {
    std::vector<std::string> users;
    std::vector<std::string> items;
    std::vector<InteractionRecord> records;

    int num_users() const { return static_cast<int>(users.size()); }
    int num_items() const { return static_cast<int>(items.size()); }

    // Per-user records in timestamp order, ties broken by input order.
    std::vector<std::vector<InteractionRecord>> per_user_history() const {
        std::vector<std::vector<InteractionRecord>> hist(users.size());
        for (const auto& r : records) hist[r.user].push_back(r);
        for (auto& h : hist) {
            std::stable_sort(h.begin(), h.end(),
                             [](const InteractionRecord& a, const InteractionRecord& b) {
                                 return a.timestamp < b.timestamp;
                             });
        }
        return hist;
    }
};

struct SplitDataset {
    int num_users = 0;
    int num_items = 0;
    std::vector<std::vector<int>> train;  // per-user item lists, time order
    std::vector<int> valid;               // -1 when the user has no valid item
    std::vector<int> test;                // -1 when the user has no test item

    bool has_eval(int user) const { return test[user] >= 0; }
};

struct CorpusStats {
    int num_users = 0;
    int num_items = 0;
    std::int64_t num_interactions = 0;
    double sparsity = 0.0;
};

enum class LogFormat { Tsv, Csv };

namespace detail {

inline std::vector<std::string> split_line(const std::string& line, LogFormat format) {
    if (format == LogFormat::Tsv) {
        // Tab-separated, falling back to arbitrary whitespace for hand-made files.
        if (line.find('\t') != std::string::npos) {
            std::vector<std::string> out;
            std::string cur;
            for (char c : line) {
                if (c == '\t') {
                    out.push_back(cur);
                    cur.clear();
                } else if (c != '\r' && c != '\n') {
                    cur.push_back(c);
                }
            }
            out.push_back(cur);
            return out;
        }
        return split_ws(line);
    }
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r' && c != '\n') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace detail

inline InteractionLog load_interactions(const std::string& path, LogFormat format = LogFormat::Tsv) {
    std::ifstream in(path);
    if (!in) throw error("cannot open interaction file: " + path);

    InteractionLog log;
    std::unordered_map<std::string, int> user_ids, item_ids;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        auto fields = detail::split_line(line, format);
        // A CSV line of pure separators splits into empties; treat as blank.
        bool all_empty = true;
        for (const auto& f : fields)
            if (!f.empty()) all_empty = false;
        if (all_empty) continue;
        if (fields.size() < 2 || fields[0].empty() || fields[1].empty())
            throw error("parse error at line " + std::to_string(line_no) + ": expected user<sep>item[<sep>timestamp]");
        InteractionRecord rec;
        auto intern = [](std::unordered_map<std::string, int>& ids, std::vector<std::string>& names,
                         const std::string& key) {
            auto it = ids.find(key);
            if (it != ids.end()) return it->second;
            int id = static_cast<int>(names.size());
            names.push_back(key);
            ids.emplace(key, id);
            return id;
        };
        rec.user = intern(user_ids, log.users, fields[0]);
        rec.item = intern(item_ids, log.items, fields[1]);
        if (fields.size() >= 3 && !fields[2].empty()) {
            try {
                rec.timestamp = std::stoll(fields[2]);
            } catch (const std::exception&) {
                throw error("parse error at line " + std::to_string(line_no) + ": bad timestamp '" + fields[2] + "'");
            }
        }
        log.records.push_back(rec);
    }
    if (log.records.empty()) throw error("empty interaction file: " + path);
    return log;
}

/// Leave-one-out: last item -> test, second-to-last -> valid, rest -> train.
/// Users with fewer than 3 interactions keep everything in train.
inline SplitDataset leave_one_out_split(const InteractionLog& log) {
    SplitDataset split;
    split.num_users = log.num_users();
    split.num_items = log.num_items();
    split.train.resize(log.num_users());
    split.valid.assign(log.num_users(), -1);
    split.test.assign(log.num_users(), -1);

    auto hist = log.per_user_history();
    for (int u = 0; u < log.num_users(); ++u) {
        const auto& h = hist[u];
        if (h.size() >= 3) {
            for (std::size_t k = 0; k + 2 < h.size(); ++k) split.train[u].push_back(h[k].item);
            split.valid[u] = h[h.size() - 2].item;
            split.test[u] = h[h.size() - 1].item;
        } else {
            for (const auto& r : h) split.train[u].push_back(r.item);
        }
    }
    return split;
}

inline CorpusStats corpus_stats(const InteractionLog& log) {
    CorpusStats s;
    s.num_users = log.num_users();
    s.num_items = log.num_items();
    s.num_interactions = static_cast<std::int64_t>(log.records.size());
    s.sparsity = 1.0 - static_cast<double>(s.num_interactions) /
                           (static_cast<double>(s.num_users) * static_cast<double>(s.num_items));
    return s;
}

inline void save_interactions(const InteractionLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw error("cannot write " + path);
    for (const auto& r : log.records)
        out << log.users[r.user] << '\t' << log.items[r.item] << '\t' << r.timestamp << '\n';
}

// Split manifest: three TSVs next to each other under `prefix`.
inline void save_split(const SplitDataset& split, const InteractionLog& log, const std::string& dir) {
    std::ofstream train(dir + "/train.tsv"), valid(dir + "/valid.tsv"), test(dir + "/test.tsv");
    if (!train || !valid || !test) throw error("cannot write split files under " + dir);
    for (int u = 0; u < split.num_users; ++u) {
        for (int i : split.train[u]) train << log.users[u] << '\t' << log.items[i] << '\n';
        if (split.valid[u] >= 0) valid << log.users[u] << '\t' << log.items[split.valid[u]] << '\n';
        if (split.test[u] >= 0) test << log.users[u] << '\t' << log.items[split.test[u]] << '\n';
    }
}

}  // namespace lightrec
