#include "debinforge/instruct.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include <fmt/format.h>

#include "debinforge/assets.hpp"
#include "debinforge/error.hpp"
#include "debinforge/hash.hpp"

namespace debinforge::instruct {

namespace {

constexpr std::size_t kTrain = 0;
constexpr std::size_t kVal = 1;
constexpr Split kSplits[] = {Split::Train, Split::Val, Split::Test};

std::uint64_t mix_seed(std::uint64_t seed, std::string_view key)
{
    return seed ^ fnv1a64(key) ^ 0x9e3779b97f4a7c15ULL;
}

bool post_cutoff(const CorpusRecord& r, const Date& cutoff)
{
    return r.published_date && std::chrono::sys_days(*r.published_date) > std::chrono::sys_days(cutoff);
}

enum class CharClass { Space, Word, Other };

CharClass char_class(unsigned char c)
{
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v')
        return CharClass::Space;
    if (std::isalnum(c) || c == '_' || c >= 0x80)
        return CharClass::Word;
    return CharClass::Other;
}

std::vector<std::int32_t> byte_ids(std::string_view chunk)
{
    std::vector<std::int32_t> ids;
    ids.reserve(chunk.size());
    for (unsigned char c : chunk)
        ids.push_back(BpeTokenizer::kFirstByte + c);
    return ids;
}

void apply_merge(std::vector<std::int32_t>& ids, std::pair<std::int32_t, std::int32_t> pair, std::int32_t id)
{
    std::size_t out = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i + 1 < ids.size() && ids[i] == pair.first && ids[i + 1] == pair.second) {
            ids[out++] = id;
            ++i;
        } else {
            ids[out++] = ids[i];
        }
    }
    ids.resize(out);
}

} // namespace

std::optional<std::string> task_output(const MatchedPair& pair, TaskKind task)
{
    const auto& label = pair.function.label;
    switch (task) {
    case TaskKind::Identify:
        return std::string(label.is_vulnerable() ? "Yes" : "No");
    case TaskKind::Classify:
        if (!label.is_vulnerable())
            return std::nullopt;
        return label.cwe()->render();
    case TaskKind::PredictName:
        if (!is_identifier(pair.function.name))
            return std::nullopt;
        return pair.function.name;
    case TaskKind::Describe:
        if (!pair.description || pair.description->find_first_not_of(" \t\r\n") == std::string::npos)
            return std::nullopt;
        return *pair.description;
    }
    return std::nullopt;
}

AssembleResult assemble_records(const std::vector<MatchedPair>& pairs, const InstructionPools& pools,
                                const AssembleOptions& options)
{
    for (TaskKind task : options.tasks) {
        auto it = pools.find(task);
        if (it == pools.end() || it->second.empty())
            fail(ErrorKind::MissingPool, fmt::format("no instruction pool for task {}", to_string(task)));
    }
    AssembleResult result;
    for (const auto& pair : pairs) {
        const auto& fn = pair.function;
        if (fn.label.is_unknown() || fn.name.empty()) {
            result.skipped.push_back({fn.id, fn.name, cell_name(pair.config),
                                      fn.name.empty() ? "no function name" : "unknown label: " + fn.label.reason()});
            continue;
        }
        for (TaskKind task : options.tasks) {
            auto output = task_output(pair, task);
            if (!output)
                continue;
            const auto& pool = pools.at(task);

            CorpusRecord r;
            r.provenance = fn.unit.provenance;
            r.source_path = fn.unit.path;
            r.func_name = fn.name;
            r.source_code = fn.text;
            r.decompiled_code = pair.decompiled.decompiled_text;
            r.architecture = pair.config.architecture;
            r.optimization = pair.config.optimization;
            r.compiler = pair.config.compiler;
            r.stripped = pair.config.strip;
            r.is_vulnerable = fn.label.is_vulnerable();
            if (r.is_vulnerable)
                r.cwe = fn.label.cwe();
            r.description = pair.description;
            r.task = task;
            r.output = *output;
            r.published_date = fn.unit.published_date;

            if (options.expand_instructions) {
                for (std::size_t k = 0; k < pool.size(); ++k) {
                    r.id = record_id(fn.unit.path, fn.span, pair.config, task, std::to_string(k));
                    r.instruction = pool[k];
                    result.records.push_back(r);
                }
            } else {
                r.id = record_id(fn.unit.path, fn.span, pair.config, task);
                std::mt19937_64 rng(mix_seed(options.seed, r.id));
                r.instruction = pool[rng() % pool.size()];
                result.records.push_back(std::move(r));
            }
        }
    }
    return result;
}

Json to_json(const SkippedPair& s)
{
    return {{"function_id", s.function_id}, {"function_name", s.function_name}, {"cell", s.cell}, {"reason", s.reason}};
}

std::array<std::size_t, 3> split_targets(std::size_t n, const std::array<double, 3>& ratios)
{
    std::array<std::size_t, 3> targets{};
    std::array<double, 3> remainders{};
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        const double exact = ratios[i] * static_cast<double>(n);
        targets[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        remainders[i] = exact - static_cast<double>(targets[i]);
        assigned += targets[i];
    }
    std::array<std::size_t, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return remainders[a] > remainders[b]; });
    for (std::size_t k = 0; assigned < n; ++k, ++assigned)
        ++targets[order[k % 3]];
    return targets;
}

SplitResult split(std::vector<CorpusRecord> records, const SplitOptions& options)
{
    const auto& ratios = options.ratios;
    if (std::any_of(ratios.begin(), ratios.end(), [](double r) { return !(r >= 0.0); }) ||
        std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9)
        fail(ErrorKind::PreconditionViolation, "split ratios must be non-negative and sum to 1");

    SplitResult result;
    auto& report = result.report;
    const std::size_t n = records.size();
    report.targets = split_targets(n, ratios);

    struct Group {
        std::vector<std::size_t> members;
        bool post = false;
    };
    std::vector<Group> groups;
    std::map<std::pair<std::string_view, std::string_view>, std::size_t> index;
    for (std::size_t i = 0; i < n; ++i) {
        const auto key = std::pair<std::string_view, std::string_view>(records[i].source_path, records[i].func_name);
        auto [it, inserted] = index.try_emplace(key, groups.size());
        if (inserted)
            groups.emplace_back();
        auto& g = groups[it->second];
        g.members.push_back(i);
        if (post_cutoff(records[i], options.cutoff)) {
            g.post = true;
            ++report.post_cutoff_records;
        }
    }
    report.groups = groups.size();

    std::size_t post_members = 0;
    for (const auto& g : groups) {
        if (g.post) {
            ++report.post_cutoff_groups;
            post_members += g.members.size();
        }
    }
    const std::size_t train_capacity = n - post_members;
    if (report.targets[kTrain] > 0 && train_capacity + 1 < report.targets[kTrain])
        fail(ErrorKind::InfeasibleSplit,
             fmt::format("{} records fall after the cutoff; TRAIN can hold at most {} of its {} target",
                         post_members, train_capacity, report.targets[kTrain]));

    // Seeded Fisher-Yates over group order, then largest groups first.
    std::vector<std::size_t> order(groups.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(mix_seed(options.seed, "split"));
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng() % i]);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (groups[a].post != groups[b].post)
            return groups[a].post;
        return groups[a].members.size() > groups[b].members.size();
    });

    std::array<long long, 3> deficit{};
    for (std::size_t s = 0; s < 3; ++s)
        deficit[s] = static_cast<long long>(report.targets[s]);
    std::vector<std::size_t> assignment(groups.size());
    for (std::size_t gi : order) {
        const auto& g = groups[gi];
        const auto size = static_cast<long long>(g.members.size());
        std::size_t best = g.post ? kVal : kTrain;
        for (std::size_t s = best + 1; s < 3; ++s) {
            const bool fits = deficit[s] >= size;
            const bool best_fits = deficit[best] >= size;
            if ((fits && !best_fits) || (fits == best_fits && deficit[s] > deficit[best]))
                best = s;
        }
        assignment[gi] = best;
        deficit[best] -= size;
    }

    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        for (std::size_t i : groups[gi].members) {
            records[i].split = kSplits[assignment[gi]];
            ++report.counts[assignment[gi]];
            if (assignment[gi] == kTrain && post_cutoff(records[i], options.cutoff))
                ++report.post_cutoff_in_train;
        }
    }
    std::map<std::pair<std::string_view, std::string_view>, std::set<Split>> seen;
    for (const auto& r : records)
        seen[{r.source_path, r.func_name}].insert(*r.split);
    report.groups_spanning_splits = static_cast<std::size_t>(
        std::count_if(seen.begin(), seen.end(), [](const auto& kv) { return kv.second.size() > 1; }));
    report.within_tolerance = true;
    for (std::size_t s = 0; s < 3; ++s) {
        const auto diff = static_cast<long long>(report.counts[s]) - static_cast<long long>(report.targets[s]);
        if (diff > 1 || diff < -1)
            report.within_tolerance = false;
    }
    result.records = std::move(records);
    return result;
}

Json to_json(const SplitReport& r)
{
    Json counts = Json::object();
    Json targets = Json::object();
    for (std::size_t s = 0; s < 3; ++s) {
        counts[std::string(to_string(kSplits[s]))] = r.counts[s];
        targets[std::string(to_string(kSplits[s]))] = r.targets[s];
    }
    return {{"counts", counts},
            {"targets", targets},
            {"within_tolerance", r.within_tolerance},
            {"groups", r.groups},
            {"post_cutoff_groups", r.post_cutoff_groups},
            {"post_cutoff_records", r.post_cutoff_records},
            {"post_cutoff_in_train", r.post_cutoff_in_train},
            {"groups_spanning_splits", r.groups_spanning_splits}};
}

std::vector<std::string_view> pretokenize(std::string_view text)
{
    std::vector<std::string_view> chunks;
    std::size_t start = 0;
    for (std::size_t i = 1; i <= text.size(); ++i) {
        if (i == text.size() || char_class(static_cast<unsigned char>(text[i])) !=
                                    char_class(static_cast<unsigned char>(text[start]))) {
            chunks.push_back(text.substr(start, i - start));
            start = i;
        }
    }
    return chunks;
}

BpeTokenizer::BpeTokenizer(std::vector<std::pair<std::int32_t, std::int32_t>> merges) : merges_(std::move(merges))
{
    pieces_.assign(kFirstByte, std::string());
    for (int b = 0; b < 256; ++b)
        pieces_.push_back(std::string(1, static_cast<char>(b)));
    for (const auto& [a, b] : merges_) {
        const auto id = static_cast<std::int32_t>(pieces_.size());
        if (a < kFirstByte || b < kFirstByte || a >= id || b >= id)
            fail(ErrorKind::TokenizerFailure, "merge refers to an unknown token");
        ranks_.emplace(std::pair{a, b}, id);
        pieces_.push_back(pieces_[static_cast<std::size_t>(a)] + pieces_[static_cast<std::size_t>(b)]);
    }
}

BpeTokenizer BpeTokenizer::train(std::string_view corpus, std::size_t merge_count)
{
    std::map<std::string_view, std::size_t> frequency;
    for (auto chunk : pretokenize(corpus))
        ++frequency[chunk];
    std::vector<std::pair<std::vector<std::int32_t>, std::size_t>> words;
    for (const auto& [chunk, count] : frequency)
        words.emplace_back(byte_ids(chunk), count);

    std::vector<std::pair<std::int32_t, std::int32_t>> merges;
    auto next_id = static_cast<std::int32_t>(kFirstByte + 256);
    for (std::size_t m = 0; m < merge_count; ++m) {
        std::map<std::pair<std::int32_t, std::int32_t>, std::size_t> pairs;
        for (const auto& [ids, count] : words) {
            for (std::size_t i = 0; i + 1 < ids.size(); ++i)
                pairs[{ids[i], ids[i + 1]}] += count;
        }
        auto best = pairs.end();
        for (auto it = pairs.begin(); it != pairs.end(); ++it) {
            if (best == pairs.end() || it->second > best->second)
                best = it;
        }
        if (best == pairs.end() || best->second < 2)
            break;
        merges.push_back(best->first);
        for (auto& [ids, count] : words)
            apply_merge(ids, best->first, next_id);
        ++next_id;
    }
    return BpeTokenizer(std::move(merges));
}

const BpeTokenizer& BpeTokenizer::bundled()
{
    static const BpeTokenizer tokenizer = train(read_file(asset_path("tokenizer_corpus.txt")), 1000);
    return tokenizer;
}

std::vector<std::int32_t> BpeTokenizer::encode(std::string_view text) const
{
    std::vector<std::int32_t> out;
    for (auto chunk : pretokenize(text)) {
        auto ids = byte_ids(chunk);
        while (ids.size() > 1) {
            std::int32_t best_id = -1;
            std::pair<std::int32_t, std::int32_t> best_pair;
            for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
                auto it = ranks_.find({ids[i], ids[i + 1]});
                if (it != ranks_.end() && (best_id < 0 || it->second < best_id)) {
                    best_id = it->second;
                    best_pair = it->first;
                }
            }
            if (best_id < 0)
                break;
            apply_merge(ids, best_pair, best_id);
        }
        out.insert(out.end(), ids.begin(), ids.end());
    }
    return out;
}

std::string BpeTokenizer::decode(const std::vector<std::int32_t>& ids) const
{
    std::string out;
    for (auto id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= pieces_.size())
            fail(ErrorKind::TokenizerFailure, fmt::format("token id {} out of range", id));
        out += pieces_[static_cast<std::size_t>(id)];
    }
    return out;
}

std::string model_input(const CorpusRecord& record)
{
    return record.instruction + "\n\n" + record.decompiled_code;
}

PreparedRecord prepare(const CorpusRecord& record, const Tokenizer& tokenizer, const PrepareOptions& options)
{
    if (options.max_len < 2)
        fail(ErrorKind::PreconditionViolation, "max_len must leave room for BOS and EOS");
    const auto instruction = tokenizer.encode(record.instruction + "\n\n");
    auto code = tokenizer.encode(record.decompiled_code);
    const std::size_t fixed = instruction.size() + 2;
    if (fixed > options.max_len)
        fail(ErrorKind::TokenizerFailure,
             fmt::format("instruction of record {} needs {} tokens, budget is {}", record.id, fixed, options.max_len));

    PreparedRecord out;
    out.record_id = record.id;
    if (fixed + code.size() > options.max_len) {
        code.resize(options.max_len - fixed);
        out.truncated = true;
    }
    out.token_ids.reserve(options.pad ? options.max_len : fixed + code.size());
    out.token_ids.push_back(tokenizer.bos());
    out.token_ids.insert(out.token_ids.end(), instruction.begin(), instruction.end());
    out.token_ids.insert(out.token_ids.end(), code.begin(), code.end());
    out.token_ids.push_back(tokenizer.eos());
    if (options.pad)
        out.token_ids.resize(options.max_len, tokenizer.pad());
    return out;
}

Json to_json(const PreparedRecord& record)
{
    return {{"id", record.record_id}, {"token_ids", record.token_ids}, {"truncated", record.truncated}};
}

} // namespace debinforge::instruct
