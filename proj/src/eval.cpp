#include "debinforge/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <regex>
#include <set>
#include <unordered_map>

#include <fmt/format.h>

#include "debinforge/error.hpp"
#include "debinforge/hash.hpp"
#include "debinforge/parallel.hpp"

namespace debinforge::eval {

namespace {

std::vector<std::string> lower_words(std::string_view text)
{
    std::vector<std::string> words;
    std::string current;
    for (char c : text) {
        const auto u = static_cast<unsigned char>(c);
        if (std::isalnum(u)) {
            current.push_back(static_cast<char>(std::tolower(u)));
        } else if (!current.empty()) {
            words.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty())
        words.push_back(std::move(current));
    return words;
}

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts ngrams(const std::vector<std::string>& tokens, std::size_t n)
{
    NgramCounts counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i)
        ++counts[std::vector<std::string>(tokens.begin() + static_cast<long>(i),
                                          tokens.begin() + static_cast<long>(i + n))];
    return counts;
}

struct BleuStats {
    std::vector<std::size_t> matches;
    std::vector<std::size_t> totals;
    std::size_t candidate_length = 0;
    std::size_t reference_length = 0;
};

BleuStats bleu_stats(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
                     int max_n)
{
    BleuStats s;
    s.candidate_length = candidate.size();
    s.reference_length = reference.size();
    for (int n = 1; n <= max_n; ++n) {
        const auto cand = ngrams(candidate, static_cast<std::size_t>(n));
        const auto ref = ngrams(reference, static_cast<std::size_t>(n));
        std::size_t matched = 0;
        for (const auto& [gram, count] : cand) {
            auto it = ref.find(gram);
            if (it != ref.end())
                matched += std::min(count, it->second);
        }
        s.matches.push_back(matched);
        s.totals.push_back(candidate.size() >= static_cast<std::size_t>(n) ? candidate.size() - n + 1 : 0);
    }
    return s;
}

double combine(const BleuStats& s, const BleuOptions& options)
{
    if (s.candidate_length == 0)
        return 0.0;
    double log_sum = 0.0;
    for (int i = 0; i < options.max_n; ++i) {
        double matched = static_cast<double>(s.matches[static_cast<std::size_t>(i)]);
        double total = static_cast<double>(s.totals[static_cast<std::size_t>(i)]);
        if (matched == 0.0) {
            if (i == 0 || options.smoothing == BleuSmoothing::None)
                return 0.0;
            matched += 1.0;
            total += 1.0;
        }
        log_sum += std::log(matched / total);
    }
    const double c = static_cast<double>(s.candidate_length);
    const double r = static_cast<double>(s.reference_length);
    const double brevity = c > r ? 1.0 : std::exp(1.0 - r / c);
    return brevity * std::exp(log_sum / options.max_n);
}

std::vector<double> mean_pool(const std::vector<std::vector<double>>& vectors, std::size_t dimension)
{
    std::vector<double> mean(dimension, 0.0);
    for (const auto& v : vectors) {
        for (std::size_t k = 0; k < dimension; ++k)
            mean[k] += v[k];
    }
    for (auto& x : mean)
        x /= static_cast<double>(vectors.size());
    return mean;
}

double norm(const std::vector<double>& v)
{
    double sum = 0.0;
    for (double x : v)
        sum += x * x;
    return std::sqrt(sum);
}

std::vector<std::vector<double>> checked_embed(const Embedder& embedder, const std::vector<std::string>& tokens)
{
    auto vectors = embedder.embed(tokens);
    if (vectors.size() != tokens.size())
        fail(ErrorKind::EmbedderFailure, "embedder returned a wrong number of vectors");
    for (const auto& v : vectors) {
        if (v.size() != embedder.dimension())
            fail(ErrorKind::EmbedderFailure, "embedder returned a vector of the wrong dimension");
    }
    return vectors;
}

} // namespace

std::string_view to_string(Answer answer)
{
    switch (answer) {
    case Answer::Yes: return "Yes";
    case Answer::No: return "No";
    case Answer::Invalid: return "Invalid";
    }
    return "Invalid";
}

Answer parse_identification(std::string_view raw)
{
    const auto words = lower_words(raw);
    if (!words.empty() && (words.front() == "yes" || words.front() == "no"))
        return words.front() == "yes" ? Answer::Yes : Answer::No;
    const bool has_yes = std::find(words.begin(), words.end(), "yes") != words.end();
    const bool has_no = std::find(words.begin(), words.end(), "no") != words.end();
    if (has_yes == has_no)
        return Answer::Invalid;
    return has_yes ? Answer::Yes : Answer::No;
}

std::optional<CweId> parse_cwe(std::string_view raw)
{
    static const std::regex pattern(R"(cwe[-_ ]?([0-9]+))", std::regex::icase);
    const std::string text(raw);
    for (auto it = std::sregex_iterator(text.begin(), text.end(), pattern); it != std::sregex_iterator(); ++it) {
        std::string digits = (*it)[1].str();
        digits.erase(0, std::min(digits.find_first_not_of('0'), digits.size()));
        if (digits.empty() || digits.size() > 9)
            continue;
        return CweId(static_cast<std::uint32_t>(std::stoul(digits)));
    }
    return std::nullopt;
}

std::string parse_function_name(std::string_view raw)
{
    std::size_t pos = 0;
    while (pos < raw.size()) {
        std::size_t end = raw.find('\n', pos);
        if (end == std::string_view::npos)
            end = raw.size();
        const std::string_view line = raw.substr(pos, end - pos);
        pos = end + 1;
        if (line.find("```") != std::string_view::npos)
            continue;
        for (std::size_t i = 0; i < line.size(); ++i) {
            const auto c = static_cast<unsigned char>(line[i]);
            if (std::isalpha(c) || c == '_') {
                std::size_t j = i;
                while (j < line.size() && (std::isalnum(static_cast<unsigned char>(line[j])) || line[j] == '_'))
                    ++j;
                return std::string(line.substr(i, j - i));
            }
        }
    }
    return {};
}

double f1_score(double precision, double recall)
{
    return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

IdentificationScore score_confusion(const ConfusionCounts& c)
{
    IdentificationScore s;
    s.counts = c;
    s.n_vulnerable = c.tp + c.fn;
    s.n_benign = c.tn + c.fp;
    s.exact_accuracy = {c.tp + c.tn, c.total()};
    s.exact_acc_v = {c.tp, s.n_vulnerable};
    s.exact_acc_b = {c.tn, s.n_benign};
    const Fraction precision{c.tp, c.tp + c.fp};
    const Fraction recall{c.tp, c.tp + c.fn};
    auto note = [&](const Fraction& f, const char* name) {
        if (f.den == 0)
            s.undefined.emplace_back(name);
        return f.value();
    };
    s.accuracy = note(s.exact_accuracy, "accuracy");
    s.precision = note(precision, "precision");
    s.recall = note(recall, "recall");
    s.acc_v = note(s.exact_acc_v, "acc_v");
    s.acc_b = note(s.exact_acc_b, "acc_b");
    s.f1 = f1_score(s.precision, s.recall);
    return s;
}

IdentificationScore score_identification(const std::vector<Answer>& predictions, const std::vector<bool>& gold)
{
    if (predictions.size() != gold.size())
        fail(ErrorKind::LengthMismatch,
             fmt::format("{} predictions for {} gold labels", predictions.size(), gold.size()));
    if (gold.empty())
        fail(ErrorKind::EmptyInput, "no identification samples");
    ConfusionCounts c;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        const bool said_yes = predictions[i] == Answer::Yes;
        const bool said_no = predictions[i] == Answer::No;
        if (gold[i]) {
            said_yes ? ++c.tp : ++c.fn;
        } else {
            said_no ? ++c.tn : ++c.fp;
        }
    }
    return score_confusion(c);
}

ClassificationScore score_classification(const std::vector<std::optional<CweId>>& predictions,
                                         const std::vector<CweId>& gold)
{
    if (predictions.size() != gold.size())
        fail(ErrorKind::LengthMismatch,
             fmt::format("{} predictions for {} gold labels", predictions.size(), gold.size()));
    if (gold.empty())
        fail(ErrorKind::EmptyInput, "no classification samples");
    ClassificationScore score;
    std::map<std::uint32_t, std::size_t> tp, predicted, support;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        const auto g = gold[i].number();
        ++support[g];
        if (!predictions[i]) {
            ++score.invalid;
            continue;
        }
        const auto p = predictions[i]->number();
        ++predicted[p];
        if (p == g) {
            ++tp[g];
            ++correct;
        }
    }
    score.accuracy = static_cast<double>(correct) / static_cast<double>(gold.size());
    for (const auto& [cwe, n] : support) {
        ClassScore cs;
        cs.support = n;
        cs.precision = predicted[cwe] ? static_cast<double>(tp[cwe]) / static_cast<double>(predicted[cwe]) : 0.0;
        cs.recall = static_cast<double>(tp[cwe]) / static_cast<double>(n);
        cs.f1 = f1_score(cs.precision, cs.recall);
        score.macro_precision += cs.precision;
        score.macro_recall += cs.recall;
        score.macro_f1 += cs.f1;
        score.per_cwe[cwe] = cs;
    }
    const auto classes = static_cast<double>(support.size());
    score.macro_precision /= classes;
    score.macro_recall /= classes;
    score.macro_f1 /= classes;
    return score;
}

std::vector<std::string> text_tokens(std::string_view text)
{
    return lower_words(text);
}

double bleu(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
            const BleuOptions& options)
{
    if (reference.empty())
        fail(ErrorKind::EmptyReference, "BLEU needs a non-empty reference");
    if (options.max_n < 1)
        fail(ErrorKind::PreconditionViolation, "BLEU max_n must be positive");
    return combine(bleu_stats(candidate, reference, options.max_n), options);
}

double corpus_bleu(const std::vector<std::vector<std::string>>& candidates,
                   const std::vector<std::vector<std::string>>& references, const BleuOptions& options)
{
    if (candidates.size() != references.size())
        fail(ErrorKind::LengthMismatch, "corpus BLEU needs one reference per candidate");
    if (candidates.empty())
        fail(ErrorKind::EmptyInput, "corpus BLEU over no samples");
    BleuStats pooled;
    pooled.matches.assign(static_cast<std::size_t>(options.max_n), 0);
    pooled.totals.assign(static_cast<std::size_t>(options.max_n), 0);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (references[i].empty())
            fail(ErrorKind::EmptyReference, fmt::format("reference {} is empty", i));
        const auto s = bleu_stats(candidates[i], references[i], options.max_n);
        for (std::size_t n = 0; n < pooled.matches.size(); ++n) {
            pooled.matches[n] += s.matches[n];
            pooled.totals[n] += s.totals[n];
        }
        pooled.candidate_length += s.candidate_length;
        pooled.reference_length += s.reference_length;
    }
    return combine(pooled, options);
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b)
{
    std::vector<std::size_t> row(b.size() + 1, 0);
    for (const auto& x : a) {
        std::size_t diagonal = 0;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t above = row[j];
            row[j] = x == b[j - 1] ? diagonal + 1 : std::max(row[j], row[j - 1]);
            diagonal = above;
        }
    }
    return row[b.size()];
}

double rouge_l(const std::vector<std::string>& candidate, const std::vector<std::string>& reference)
{
    if (candidate.empty() || reference.empty())
        return 0.0;
    const double lcs = static_cast<double>(lcs_length(candidate, reference));
    const double p = lcs / static_cast<double>(candidate.size());
    const double r = lcs / static_cast<double>(reference.size());
    return f1_score(p, r);
}

HashEmbedder::HashEmbedder(std::size_t dimension, std::uint64_t seed) : dimension_(dimension), seed_(seed)
{
    if (dimension == 0)
        fail(ErrorKind::PreconditionViolation, "embedding dimension must be positive");
}

std::vector<std::vector<double>> HashEmbedder::embed(const std::vector<std::string>& tokens) const
{
    std::vector<std::vector<double>> out;
    out.reserve(tokens.size());
    for (const auto& token : tokens) {
        std::mt19937_64 rng(fnv1a64(token) ^ seed_);
        std::vector<double> v(dimension_);
        for (auto& x : v)
            x = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        const double n = norm(v);
        if (n == 0.0) {
            v[0] = 1.0;
        } else {
            for (auto& x : v)
                x /= n;
        }
        out.push_back(std::move(v));
    }
    return out;
}

BertScore bert_score(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
                     const Embedder& embedder)
{
    if (candidate.empty() || reference.empty())
        fail(ErrorKind::EmptyInput, "BERTScore needs non-empty candidate and reference");
    auto unit = [&](const std::vector<std::string>& tokens) {
        auto vectors = checked_embed(embedder, tokens);
        for (auto& v : vectors) {
            const double n = norm(v);
            if (n == 0.0)
                fail(ErrorKind::EmbedderFailure, "zero token embedding");
            for (auto& x : v)
                x /= n;
        }
        return vectors;
    };
    const auto c = unit(candidate);
    const auto r = unit(reference);
    std::vector<double> best_c(c.size(), -1.0), best_r(r.size(), -1.0);
    for (std::size_t i = 0; i < c.size(); ++i) {
        for (std::size_t j = 0; j < r.size(); ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < c[i].size(); ++k)
                dot += c[i][k] * r[j][k];
            best_c[i] = std::max(best_c[i], dot);
            best_r[j] = std::max(best_r[j], dot);
        }
    }
    BertScore s;
    for (double x : best_c)
        s.precision += x;
    for (double x : best_r)
        s.recall += x;
    s.precision /= static_cast<double>(c.size());
    s.recall /= static_cast<double>(r.size());
    s.f1 = f1_score(s.precision, s.recall);
    return s;
}

double cosine_similarity(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
                         const Embedder& embedder)
{
    if (candidate.empty() || reference.empty())
        fail(ErrorKind::EmptyInput, "cosine similarity needs non-empty candidate and reference");
    const auto a = mean_pool(checked_embed(embedder, candidate), embedder.dimension());
    const auto b = mean_pool(checked_embed(embedder, reference), embedder.dimension());
    const double na = norm(a);
    const double nb = norm(b);
    if (na == 0.0 || nb == 0.0)
        fail(ErrorKind::ZeroVector, "mean-pooled embedding is zero");
    double dot = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k)
        dot += a[k] * b[k];
    return std::clamp(dot / (na * nb), -1.0, 1.0);
}

TextScore score_text(const std::vector<std::string>& candidates, const std::vector<std::string>& references,
                     const Embedder& embedder, const BleuOptions& options, unsigned jobs)
{
    if (candidates.size() != references.size())
        fail(ErrorKind::LengthMismatch, "one reference per candidate is required");
    struct Sample {
        bool used = false;
        std::vector<std::string> cand;
        std::vector<std::string> ref;
        double bleu = 0, rouge = 0, bp = 0, br = 0, bf = 0, sim = 0;
    };
    auto samples = parallel_map(candidates.size(), jobs, [&](std::size_t i) {
        Sample s;
        s.ref = text_tokens(references[i]);
        if (s.ref.empty())
            return s;
        s.used = true;
        s.cand = text_tokens(candidates[i]);
        if (s.cand.empty())
            return s;
        s.bleu = bleu(s.cand, s.ref, options);
        s.rouge = rouge_l(s.cand, s.ref);
        const auto b = bert_score(s.cand, s.ref, embedder);
        s.bp = b.precision;
        s.br = b.recall;
        s.bf = b.f1;
        s.sim = cosine_similarity(s.cand, s.ref, embedder);
        return s;
    });
    TextScore t;
    std::vector<std::vector<std::string>> cands, refs;
    for (auto& s : samples) {
        if (!s.used) {
            ++t.skipped;
            continue;
        }
        ++t.count;
        t.bleu += s.bleu;
        t.rouge_l += s.rouge;
        t.bertscore_p += s.bp;
        t.bertscore_r += s.br;
        t.bertscore_f1 += s.bf;
        t.similarity += s.sim;
        cands.push_back(std::move(s.cand));
        refs.push_back(std::move(s.ref));
    }
    if (t.count) {
        const auto n = static_cast<double>(t.count);
        t.bleu /= n;
        t.rouge_l /= n;
        t.bertscore_p /= n;
        t.bertscore_r /= n;
        t.bertscore_f1 /= n;
        t.similarity /= n;
        t.corpus_bleu = corpus_bleu(cands, refs, options);
    }
    return t;
}

std::vector<Prediction> read_predictions(const std::filesystem::path& path)
{
    std::vector<Prediction> out;
    for (const auto& row : read_jsonl(path)) {
        if (!row.contains("id") || !row["id"].is_string() || !row.contains("raw_output") ||
            !row["raw_output"].is_string())
            fail(ErrorKind::Schema, "prediction rows need string fields 'id' and 'raw_output'");
        out.push_back({row["id"].get<std::string>(), row["raw_output"].get<std::string>()});
    }
    return out;
}

MetricReport evaluate(const std::vector<CorpusRecord>& gold, const std::vector<Prediction>& predictions,
                      const Embedder& embedder, const BleuOptions& options, unsigned jobs)
{
    MetricReport report;
    std::unordered_map<std::string_view, const std::string*> raw_by_id;
    std::set<std::string_view> gold_ids;
    for (const auto& g : gold)
        gold_ids.insert(g.id);
    for (const auto& p : predictions) {
        if (!gold_ids.count(p.id))
            report.unknown_ids.push_back(p.id);
        else
            raw_by_id.emplace(p.id, &p.raw_output);
    }

    std::vector<Answer> ident_pred;
    std::vector<bool> ident_gold;
    std::vector<std::optional<CweId>> class_pred;
    std::vector<CweId> class_gold;
    std::vector<std::string> name_pred, name_gold, desc_pred, desc_gold;
    for (const auto& g : gold) {
        auto it = raw_by_id.find(g.id);
        const bool have = it != raw_by_id.end();
        if (have)
            ++report.matched;
        else
            report.missing_predictions.push_back(g.id);
        const std::string raw = have ? *it->second : std::string();
        switch (g.task) {
        case TaskKind::Identify: {
            const Answer a = have ? parse_identification(raw) : Answer::Invalid;
            ident_pred.push_back(a);
            ident_gold.push_back(g.is_vulnerable);
            if (g.is_vulnerable && g.cwe) {
                auto& [hit, total] = report.detection_by_cwe[g.cwe->number()];
                hit += a == Answer::Yes;
                ++total;
            }
            break;
        }
        case TaskKind::Classify:
            if (!g.cwe)
                break;
            class_pred.push_back(have ? parse_cwe(raw) : std::nullopt);
            class_gold.push_back(*g.cwe);
            break;
        case TaskKind::PredictName:
            name_pred.push_back(parse_function_name(raw));
            name_gold.push_back(g.output);
            break;
        case TaskKind::Describe:
            desc_pred.push_back(raw);
            desc_gold.push_back(g.output);
            break;
        }
    }
    if (!ident_gold.empty())
        report.identification = score_identification(ident_pred, ident_gold);
    if (!class_gold.empty())
        report.classification = score_classification(class_pred, class_gold);
    if (!name_gold.empty())
        report.function_names = score_text(name_pred, name_gold, embedder, options, jobs);
    if (!desc_gold.empty())
        report.descriptions = score_text(desc_pred, desc_gold, embedder, options, jobs);
    return report;
}

namespace {

Json text_json(const TextScore& t)
{
    return {{"bleu", t.bleu},
            {"corpus_bleu", t.corpus_bleu},
            {"rouge_l", t.rouge_l},
            {"bertscore_p", t.bertscore_p},
            {"bertscore_r", t.bertscore_r},
            {"bertscore_f1", t.bertscore_f1},
            {"similarity", t.similarity},
            {"count", t.count},
            {"skipped", t.skipped}};
}

} // namespace

Json to_json(const MetricReport& report)
{
    Json out = Json::object();
    if (const auto& s = report.identification) {
        Json by_cwe = Json::object();
        for (const auto& [cwe, hit_total] : report.detection_by_cwe) {
            by_cwe[CweId(cwe).render()] = {
                {"acc_v", static_cast<double>(hit_total.first) / static_cast<double>(hit_total.second)},
                {"count", hit_total.second}};
        }
        out["identification"] = {{"accuracy", s->accuracy},
                                 {"precision", s->precision},
                                 {"recall", s->recall},
                                 {"f1", s->f1},
                                 {"acc_v", s->acc_v},
                                 {"acc_b", s->acc_b},
                                 {"tp", s->counts.tp},
                                 {"fp", s->counts.fp},
                                 {"tn", s->counts.tn},
                                 {"fn", s->counts.fn},
                                 {"undefined", s->undefined},
                                 {"per_cwe", by_cwe}};
    }
    if (const auto& s = report.classification) {
        Json per = Json::object();
        for (const auto& [cwe, cs] : s->per_cwe) {
            per[CweId(cwe).render()] = {
                {"precision", cs.precision}, {"recall", cs.recall}, {"f1", cs.f1}, {"support", cs.support}};
        }
        out["classification"] = {{"accuracy", s->accuracy},
                                 {"precision", s->macro_precision},
                                 {"recall", s->macro_recall},
                                 {"f1", s->macro_f1},
                                 {"invalid", s->invalid},
                                 {"per_cwe", per}};
    }
    if (report.function_names)
        out["predict_name"] = text_json(*report.function_names);
    if (report.descriptions)
        out["describe"] = text_json(*report.descriptions);
    out["matched"] = report.matched;
    out["missing_predictions"] = report.missing_predictions.size();
    out["unknown_ids"] = report.unknown_ids.size();
    return out;
}

} // namespace debinforge::eval
