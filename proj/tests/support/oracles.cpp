#include "oracles.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

namespace oracle {

std::vector<std::string> simple_tokens(const std::string& text)
{
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c) || c >= 0x80) {
            cur += static_cast<char>(c < 0x80 ? std::tolower(c) : c);
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) {
        out.push_back(cur);
    }
    return out;
}

namespace {

struct Collection {
    std::vector<std::string> ids;
    std::vector<std::vector<std::string>> tokens;
    double avgdl = 0;
};

Collection tokenize_all(const std::vector<std::pair<std::string, std::string>>& records)
{
    Collection c;
    double total = 0;
    for (const auto& [id, text] : records) {
        c.ids.push_back(id);
        c.tokens.push_back(simple_tokens(text));
        total += static_cast<double>(c.tokens.back().size());
    }
    c.avgdl = records.empty() ? 0 : total / static_cast<double>(records.size());
    return c;
}

double score_doc(const Collection& c, std::size_t d, const std::vector<std::string>& query, double k1, double b)
{
    const double n = static_cast<double>(c.ids.size());
    double s = 0.0;
    for (const auto& t : query) {
        double tf = static_cast<double>(std::count(c.tokens[d].begin(), c.tokens[d].end(), t));
        if (tf == 0) {
            continue;
        }
        double df = 0;
        for (const auto& doc : c.tokens) {
            df += std::find(doc.begin(), doc.end(), t) != doc.end() ? 1 : 0;
        }
        double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
        double len = static_cast<double>(c.tokens[d].size());
        s += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len / c.avgdl));
    }
    return s;
}

void order(std::vector<Hit>& hits, std::size_t k)
{
    std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        return a.id > b.id;
    });
    if (hits.size() > k) {
        hits.resize(k);
    }
}

}  // namespace

std::vector<Hit> bm25_search(const std::vector<std::pair<std::string, std::string>>& records, const std::string& query,
                             double k1, double b, std::size_t k)
{
    auto c = tokenize_all(records);
    auto q = simple_tokens(query);
    std::vector<Hit> hits;
    for (std::size_t d = 0; d < c.ids.size(); ++d) {
        bool any = false;
        for (const auto& t : q) {
            any = any || std::find(c.tokens[d].begin(), c.tokens[d].end(), t) != c.tokens[d].end();
        }
        if (any) {
            hits.push_back({c.ids[d], score_doc(c, d, q, k1, b)});
        }
    }
    order(hits, k);
    return hits;
}

double bm25_single(const std::vector<std::pair<std::string, std::string>>& records, const std::vector<std::string>& query_terms,
                   const std::string& id, double k1, double b)
{
    auto c = tokenize_all(records);
    for (std::size_t d = 0; d < c.ids.size(); ++d) {
        if (c.ids[d] == id) {
            return score_doc(c, d, query_terms, k1, b);
        }
    }
    return -1.0;
}

double maxsim(const Rows& q, const Rows& d)
{
    double total = 0.0;
    for (const auto& qi : q) {
        double best = -1e300;
        for (const auto& dj : d) {
            double s = 0.0;
            for (std::size_t x = 0; x < qi.size(); ++x) {
                s += static_cast<double>(qi[x]) * static_cast<double>(dj[x]);
            }
            best = std::max(best, s);
        }
        total += best;
    }
    return total;
}

std::vector<Hit> dense_search(const Rows& q, const std::map<std::string, Rows>& items, std::size_t k)
{
    std::vector<Hit> hits;
    for (const auto& [id, rows] : items) {
        hits.push_back({id, maxsim(q, rows)});
    }
    order(hits, k);
    return hits;
}

std::map<std::string, double> ndcg(const Ranking& run, const Judgments& qrels, std::size_t k, bool exponential)
{
    auto gain = [&](int g) { return exponential ? std::pow(2.0, g) - 1.0 : static_cast<double>(g); };
    std::map<std::string, double> out;
    for (const auto& [qid, items] : run) {
        auto jq = qrels.find(qid);
        if (jq == qrels.end()) {
            continue;
        }
        std::vector<double> ideal;
        for (const auto& [_, g] : jq->second) {
            ideal.push_back(gain(g));
        }
        std::sort(ideal.rbegin(), ideal.rend());
        double idcg = 0;
        for (std::size_t r = 1; r <= k && r <= ideal.size(); ++r) {
            idcg += ideal[r - 1] / std::log2(r + 1.0);
        }
        if (idcg == 0) {
            continue;
        }
        double dcg = 0;
        for (std::size_t r = 1; r <= k && r <= items.size(); ++r) {
            auto it = jq->second.find(items[r - 1]);
            dcg += (it == jq->second.end() ? 0.0 : gain(it->second)) / std::log2(r + 1.0);
        }
        out[qid] = dcg / idcg;
    }
    return out;
}

namespace {

std::set<std::string> relevant_set(const std::map<std::string, int>& judged, int threshold)
{
    std::set<std::string> rel;
    for (const auto& [id, g] : judged) {
        if (g >= threshold) {
            rel.insert(id);
        }
    }
    return rel;
}

}  // namespace

std::map<std::string, double> average_precision(const Ranking& run, const Judgments& qrels, std::size_t k, int threshold)
{
    std::map<std::string, double> out;
    for (const auto& [qid, items] : run) {
        auto jq = qrels.find(qid);
        if (jq == qrels.end()) {
            continue;
        }
        auto rel = relevant_set(jq->second, threshold);
        if (rel.empty()) {
            continue;
        }
        double sum = 0;
        for (std::size_t cut = 1; cut <= k && cut <= items.size(); ++cut) {
            if (!rel.count(items[cut - 1])) {
                continue;
            }
            std::size_t found = 0;
            for (std::size_t i = 0; i < cut; ++i) {
                found += rel.count(items[i]);
            }
            sum += static_cast<double>(found) / static_cast<double>(cut);
        }
        out[qid] = sum / static_cast<double>(rel.size());
    }
    return out;
}

std::map<std::string, double> recall(const Ranking& run, const Judgments& qrels, std::size_t k, int threshold)
{
    std::map<std::string, double> out;
    for (const auto& [qid, items] : run) {
        auto jq = qrels.find(qid);
        if (jq == qrels.end()) {
            continue;
        }
        auto rel = relevant_set(jq->second, threshold);
        if (rel.empty()) {
            continue;
        }
        std::set<std::string> top(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(std::min(k, items.size())));
        std::size_t hit = 0;
        for (const auto& r : rel) {
            hit += top.count(r);
        }
        out[qid] = static_cast<double>(hit) / static_cast<double>(rel.size());
    }
    return out;
}

double mean(const std::map<std::string, double>& values)
{
    if (values.empty()) {
        return 0.0;
    }
    double s = 0;
    for (const auto& [_, v] : values) {
        s += v;
    }
    return s / static_cast<double>(values.size());
}

}  // namespace oracle
