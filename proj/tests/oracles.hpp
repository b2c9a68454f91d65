#pragma once

// Straight-from-the-definition reference implementations used to check the metric code.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "debinforge/eval.hpp"

namespace oracle {

using Tokens = std::vector<std::string>;

inline std::size_t lcs(const Tokens& a, const Tokens& b, std::size_t i = 0, std::size_t j = 0)
{
    if (i == a.size() || j == b.size())
        return 0;
    if (a[i] == b[j])
        return 1 + lcs(a, b, i + 1, j + 1);
    return std::max(lcs(a, b, i + 1, j), lcs(a, b, i, j + 1));
}

inline double rouge_l(const Tokens& cand, const Tokens& ref)
{
    if (cand.empty() || ref.empty())
        return 0.0;
    const double l = static_cast<double>(lcs(cand, ref));
    if (l == 0)
        return 0.0;
    const double p = l / cand.size();
    const double r = l / ref.size();
    return 2 * p * r / (p + r);
}

inline std::map<std::string, int> ngram_counts(const Tokens& t, std::size_t n)
{
    std::map<std::string, int> counts;
    for (std::size_t i = 0; i + n <= t.size(); ++i) {
        std::string key;
        for (std::size_t k = 0; k < n; ++k)
            key += t[i + k] + '\x1f';
        ++counts[key];
    }
    return counts;
}

// Clipped precision per order, add-one for zero matches at orders >= 2, brevity penalty.
inline double bleu(const Tokens& cand, const Tokens& ref, int max_n = 4, bool smooth = true)
{
    if (cand.empty())
        return 0.0;
    double log_sum = 0;
    for (int n = 1; n <= max_n; ++n) {
        const auto c = ngram_counts(cand, n);
        const auto r = ngram_counts(ref, n);
        int matched = 0;
        int total = 0;
        for (const auto& [g, k] : c) {
            total += k;
            auto it = r.find(g);
            matched += std::min(k, it == r.end() ? 0 : it->second);
        }
        double p;
        if (matched > 0)
            p = double(matched) / total;
        else if (n == 1 || !smooth)
            return 0.0;
        else
            p = 1.0 / (total + 1);
        log_sum += std::log(p);
    }
    const double bp = cand.size() > ref.size() ? 1.0 : std::exp(1.0 - double(ref.size()) / double(cand.size()));
    return bp * std::exp(log_sum / max_n);
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b)
{
    double s = 0;
    for (std::size_t k = 0; k < a.size(); ++k)
        s += a[k] * b[k];
    return s;
}

inline double cos(const std::vector<double>& a, const std::vector<double>& b)
{
    return dot(a, b) / (std::sqrt(dot(a, a)) * std::sqrt(dot(b, b)));
}

// Mean of the token embeddings on each side, then the cosine of the two means.
inline double cosine_similarity(const Tokens& cand, const Tokens& ref, const debinforge::eval::Embedder& e)
{
    auto mean = [&](const Tokens& t) {
        auto vs = e.embed(t);
        std::vector<double> m(e.dimension(), 0.0);
        for (const auto& v : vs)
            for (std::size_t k = 0; k < m.size(); ++k)
                m[k] += v[k];
        for (auto& x : m)
            x /= static_cast<double>(t.size());
        return m;
    };
    return cos(mean(cand), mean(ref));
}

struct Bert {
    double p, r, f;
};

// Every candidate token against every reference token.
inline Bert bert_score(const Tokens& cand, const Tokens& ref, const debinforge::eval::Embedder& e)
{
    const auto c = e.embed(cand);
    const auto r = e.embed(ref);
    double p = 0, rr = 0;
    for (const auto& x : c) {
        double best = -2;
        for (const auto& y : r)
            best = std::max(best, cos(x, y));
        p += best;
    }
    for (const auto& y : r) {
        double best = -2;
        for (const auto& x : c)
            best = std::max(best, cos(x, y));
        rr += best;
    }
    p /= c.size();
    rr /= r.size();
    return {p, rr, p + rr == 0 ? 0.0 : 2 * p * rr / (p + rr)};
}

// Fixed vectors per token.
class TableEmbedder : public debinforge::eval::Embedder {
public:
    explicit TableEmbedder(std::map<std::string, std::vector<double>> table, std::size_t dim)
        : table_(std::move(table)), dim_(dim)
    {
    }
    std::size_t dimension() const override { return dim_; }
    std::vector<std::vector<double>> embed(const Tokens& tokens) const override
    {
        std::vector<std::vector<double>> out;
        for (const auto& t : tokens)
            out.push_back(table_.at(t));
        return out;
    }

private:
    std::map<std::string, std::vector<double>> table_;
    std::size_t dim_;
};

} // namespace oracle
