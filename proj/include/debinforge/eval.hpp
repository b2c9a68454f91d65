#pragma once

// Answer grounding and the identification, classification and text-generation metrics.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "debinforge/model.hpp"

namespace debinforge::eval {

// ---------------------------------------------------------------------------
// Grounding raw model output.

enum class Answer { Yes, No, Invalid };

std::string_view to_string(Answer answer);

// Leading yes/no token after stripping quotes and punctuation; otherwise the single
// kind of yes/no word present. Both or neither is Invalid.
Answer parse_identification(std::string_view raw);

// First case-insensitive match of CWE[-_ ]?<digits>.
std::optional<CweId> parse_cwe(std::string_view raw);

// First identifier on the first non-empty line, fences and quotes ignored; empty if none.
std::string parse_function_name(std::string_view raw);

// ---------------------------------------------------------------------------
// Identification.

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;

    std::size_t total() const { return tp + fp + tn + fn; }
    bool operator==(const ConfusionCounts&) const = default;
};

// An exact ratio of counts; den == 0 means undefined (value 0).
struct Fraction {
    std::size_t num = 0;
    std::size_t den = 0;

    double value() const { return den ? static_cast<double>(num) / static_cast<double>(den) : 0.0; }
};

struct IdentificationScore {
    ConfusionCounts counts;
    Fraction exact_accuracy;
    Fraction exact_acc_v;
    Fraction exact_acc_b;
    double accuracy = 0;
    double precision = 0;
    double recall = 0;
    double f1 = 0;
    double acc_v = 0;
    double acc_b = 0;
    std::size_t n_vulnerable = 0;
    std::size_t n_benign = 0;
    // Names of metrics whose denominator was zero (reported as 0).
    std::vector<std::string> undefined;
};

// Vulnerable is the positive class; Invalid predictions count as wrong.
// Throws LengthMismatch or EmptyInput.
IdentificationScore score_identification(const std::vector<Answer>& predictions, const std::vector<bool>& gold);
IdentificationScore score_confusion(const ConfusionCounts& counts);

// 2pr/(p+r), 0 when p+r is 0.
double f1_score(double precision, double recall);

// ---------------------------------------------------------------------------
// Classification.

struct ClassScore {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
    std::size_t support = 0;
};

struct ClassificationScore {
    double accuracy = 0;
    double macro_precision = 0;
    double macro_recall = 0;
    double macro_f1 = 0;
    std::size_t invalid = 0;
    // Keyed by gold CWE number; macro averages run over these classes.
    std::map<std::uint32_t, ClassScore> per_cwe;
};

ClassificationScore score_classification(const std::vector<std::optional<CweId>>& predictions,
                                         const std::vector<CweId>& gold);

// ---------------------------------------------------------------------------
// Text metrics.

// Lowercased runs of letters and digits; whitespace, punctuation and '_' separate tokens.
std::vector<std::string> text_tokens(std::string_view text);

enum class BleuSmoothing { None, AddOneHigherOrder };

struct BleuOptions {
    int max_n = 4;
    BleuSmoothing smoothing = BleuSmoothing::AddOneHigherOrder;
};

// Sentence BLEU: geometric mean of clipped n-gram precisions times the brevity penalty.
// With AddOneHigherOrder a zero match count for n >= 2 becomes (0 + 1) / (total + 1).
// Throws EmptyReference.
double bleu(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
            const BleuOptions& options = {});
// Corpus BLEU: n-gram counts and lengths pooled before combining.
double corpus_bleu(const std::vector<std::vector<std::string>>& candidates,
                   const std::vector<std::vector<std::string>>& references, const BleuOptions& options = {});

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);
// LCS F-measure with beta = 1; 0 when either side is empty.
double rouge_l(const std::vector<std::string>& candidate, const std::vector<std::string>& reference);

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::size_t dimension() const = 0;
    // One vector of dimension() per token. Throws EmbedderFailure.
    virtual std::vector<std::vector<double>> embed(const std::vector<std::string>& tokens) const = 0;
};

// Token -> unit vector with non-negative components derived from a hash of the token.
class HashEmbedder : public Embedder {
public:
    explicit HashEmbedder(std::size_t dimension = 64, std::uint64_t seed = 0);

    std::size_t dimension() const override { return dimension_; }
    std::vector<std::vector<double>> embed(const std::vector<std::string>& tokens) const override;

private:
    std::size_t dimension_;
    std::uint64_t seed_;
};

struct BertScore {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
};

// Greedy matching on token cosine similarity. Throws EmptyInput or EmbedderFailure.
BertScore bert_score(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
                     const Embedder& embedder);

// Cosine of the mean-pooled token embeddings. Throws EmptyInput or ZeroVector.
double cosine_similarity(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
                         const Embedder& embedder);

struct TextScore {
    double bleu = 0;
    double corpus_bleu = 0;
    double rouge_l = 0;
    double bertscore_p = 0;
    double bertscore_r = 0;
    double bertscore_f1 = 0;
    double similarity = 0;
    std::size_t count = 0;
    std::size_t skipped = 0;
};

// Per-sample means over pairs with a non-empty reference. Candidates that tokenize to
// nothing score 0 on every metric.
TextScore score_text(const std::vector<std::string>& candidates, const std::vector<std::string>& references,
                     const Embedder& embedder, const BleuOptions& options = {}, unsigned jobs = 1);

// ---------------------------------------------------------------------------
// Corpus evaluation.

struct Prediction {
    std::string id;
    std::string raw_output;
};

std::vector<Prediction> read_predictions(const std::filesystem::path& path);

struct MetricReport {
    std::optional<IdentificationScore> identification;
    std::optional<ClassificationScore> classification;
    std::optional<TextScore> function_names;
    std::optional<TextScore> descriptions;
    std::size_t matched = 0;
    std::vector<std::string> missing_predictions;
    std::vector<std::string> unknown_ids;
    // Identification accuracy on gold-vulnerable records, by CWE.
    std::map<std::uint32_t, std::pair<std::size_t, std::size_t>> detection_by_cwe;
};

// Joins predictions to gold records by id and scores each task present.
MetricReport evaluate(const std::vector<CorpusRecord>& gold, const std::vector<Prediction>& predictions,
                      const Embedder& embedder, const BleuOptions& options = {}, unsigned jobs = 1);

Json to_json(const MetricReport& report);

} // namespace debinforge::eval
