#pragma once

// Instruction-record assembly, leakage-free chronological splitting, and token-budgeted
// record preparation.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "debinforge/model.hpp"

namespace debinforge::instruct {

struct AssembleOptions {
    std::vector<TaskKind> tasks{std::begin(kAllTasks), std::end(kAllTasks)};
    std::uint64_t seed = 0;
    // One record per pool instruction instead of one sampled instruction.
    bool expand_instructions = false;
};

struct SkippedPair {
    std::string function_id;
    std::string function_name;
    std::string cell;
    std::string reason;
};

struct AssembleResult {
    std::vector<CorpusRecord> records;
    std::vector<SkippedPair> skipped;
};

// Records in (pair, task) order. Pairs with Unknown labels or without a name are
// skipped; Classify only covers vulnerable pairs and Describe only pairs with a
// description. Throws MissingPool.
AssembleResult assemble_records(const std::vector<MatchedPair>& pairs, const InstructionPools& pools,
                                const AssembleOptions& options = {});

// Expected answer of `pair` for `task`, nullopt when the task does not apply.
std::optional<std::string> task_output(const MatchedPair& pair, TaskKind task);

Json to_json(const SkippedPair& skipped);

struct SplitOptions {
    std::array<double, 3> ratios{0.8, 0.1, 0.1};
    Date cutoff{std::chrono::year{2021}, std::chrono::month{12}, std::chrono::day{31}};
    std::uint64_t seed = 0;
};

struct SplitReport {
    std::array<std::size_t, 3> targets{};
    std::array<std::size_t, 3> counts{};
    std::size_t groups = 0;
    std::size_t post_cutoff_groups = 0;
    std::size_t post_cutoff_records = 0;
    std::size_t post_cutoff_in_train = 0;
    std::size_t groups_spanning_splits = 0;
    // |count - target| <= 1 for every split.
    bool within_tolerance = false;
};

struct SplitResult {
    std::vector<CorpusRecord> records;
    SplitReport report;
};

// Largest-remainder targets for n records.
std::array<std::size_t, 3> split_targets(std::size_t n, const std::array<double, 3>& ratios);

// Groups records by source function (source_path, func_name) and assigns whole
// groups; groups with any record dated after the cutoff never enter TRAIN. Records
// keep their input order. Throws PreconditionViolation for bad ratios and
// InfeasibleSplit when the post-cutoff records cannot fit outside TRAIN.
SplitResult split(std::vector<CorpusRecord> records, const SplitOptions& options = {});

Json to_json(const SplitReport& report);

// ---------------------------------------------------------------------------
// Tokenization.

class Tokenizer {
public:
    virtual ~Tokenizer() = default;
    virtual std::vector<std::int32_t> encode(std::string_view text) const = 0;
    virtual std::string decode(const std::vector<std::int32_t>& ids) const = 0;
    virtual std::int32_t bos() const = 0;
    virtual std::int32_t eos() const = 0;
    virtual std::int32_t pad() const = 0;
};

// Byte-level BPE: ids 0..2 are PAD/BOS/EOS, 3..258 the raw bytes, then one id per merge.
// Pre-tokenizes into whitespace, word and punctuation runs; merges never cross them.
class BpeTokenizer : public Tokenizer {
public:
    static constexpr std::int32_t kPad = 0;
    static constexpr std::int32_t kBos = 1;
    static constexpr std::int32_t kEos = 2;
    static constexpr std::int32_t kFirstByte = 3;

    explicit BpeTokenizer(std::vector<std::pair<std::int32_t, std::int32_t>> merges);

    // Greedy most-frequent-pair training; ties go to the smallest pair.
    static BpeTokenizer train(std::string_view corpus, std::size_t merges);
    // Trained on the bundled tokenizer corpus asset; cached.
    static const BpeTokenizer& bundled();

    std::vector<std::int32_t> encode(std::string_view text) const override;
    std::string decode(const std::vector<std::int32_t>& ids) const override;
    std::int32_t bos() const override { return kBos; }
    std::int32_t eos() const override { return kEos; }
    std::int32_t pad() const override { return kPad; }

    std::size_t vocab_size() const { return pieces_.size(); }
    const std::vector<std::pair<std::int32_t, std::int32_t>>& merges() const { return merges_; }

private:
    std::vector<std::pair<std::int32_t, std::int32_t>> merges_;
    std::map<std::pair<std::int32_t, std::int32_t>, std::int32_t> ranks_;
    std::vector<std::string> pieces_;
};

// Pre-tokenization used by the BPE tokenizer.
std::vector<std::string_view> pretokenize(std::string_view text);

struct PreparedRecord {
    std::string record_id;
    std::vector<std::int32_t> token_ids;
    bool truncated = false;
};

struct PrepareOptions {
    std::size_t max_len = 512;
    bool pad = false;
};

// The prompt text fed to the tokenizer: instruction, blank line, decompiled code.
std::string model_input(const CorpusRecord& record);

// [BOS] instruction "\n\n" code [EOS], cutting code tokens from the tail to fit max_len.
// Throws TokenizerFailure when the instruction alone does not fit.
PreparedRecord prepare(const CorpusRecord& record, const Tokenizer& tokenizer, const PrepareOptions& options = {});

Json to_json(const PreparedRecord& record);

} // namespace debinforge::instruct
