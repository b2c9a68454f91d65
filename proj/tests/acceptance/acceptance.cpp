// Acceptance checks, one PASS/FAIL line each. `debinforge_acceptance [N]` runs criterion N only.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "debinforge/build.hpp"
#include "debinforge/error.hpp"
#include "debinforge/eval.hpp"
#include "debinforge/extractor.hpp"
#include "debinforge/instruct.hpp"
#include "debinforge/llm.hpp"
#include "debinforge/pipeline.hpp"
#include "debinforge/postprocess.hpp"
#include "debinforge/process.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace debinforge;
using Clock = std::chrono::steady_clock;

namespace {

constexpr int kSkip = 77;

struct Outcome {
    bool pass = true;
    std::string detail;
    bool skipped = false;

    void expect(bool ok, const std::string& what)
    {
        if (!ok && pass) {
            pass = false;
            detail = what;
        }
    }
};

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// ---------------------------------------------------------------------------

std::string reference_label(const std::string& name)
{
    static const std::regex prefix("^CWE([0-9]{1,9})(?![0-9])");
    const bool bad = name.find("bad") != std::string::npos;
    const bool good = name.find("good") != std::string::npos;
    std::smatch m;
    if (bad && !good && std::regex_search(name, m, prefix) && std::stoul(m[1]) != 0)
        return "V" + std::to_string(std::stoul(m[1]));
    if (good && !bad)
        return "B";
    return "U";
}

std::string observed_label(const VulnLabel& label)
{
    if (label.is_vulnerable())
        return "V" + std::to_string(label.cwe()->number());
    return label.is_benign() ? "B" : "U";
}

Outcome labeling()
{
    Outcome o;
    std::mt19937_64 rng(1);
    const std::vector<std::string> prefixes{"CWE121_", "CWE78_", "CWE416_", "CWE590_", "CWE_", "cwe121_", "CWE0_",
                                            "XCWE121_", "CWE1234567890_", "", "CWE476", "CWE190x_"};
    const std::vector<std::string> stems{"Stack_Based_Buffer_Overflow__", "OS_Command_Injection__", "Use_After_Free__",
                                         "helper_", "", "char_type_"};
    const std::vector<std::string> markers{"bad",     "good",     "goodG2B", "goodB2G1", "badSink", "Bad",
                                           "GOOD",    "badgood",  "gooood",  "none",     "ba_d",    "bad_good_mixed",
                                           "good1_bad"};
    std::vector<std::string> names;
    for (const auto& p : prefixes)
        for (const auto& s : stems)
            for (const auto& m : markers)
                names.push_back(p + s + m);
    std::shuffle(names.begin(), names.end(), rng);
    o.expect(names.size() >= 200, "fewer than 200 names");

    const auto start = Clock::now();
    std::size_t mismatches = 0;
    std::string first;
    for (const auto& n : names) {
        if (observed_label(extract::label_function(n)) != reference_label(n)) {
            if (!mismatches++)
                first = n;
        }
    }
    const double elapsed = seconds_since(start);
    o.expect(mismatches == 0, fmt::format("{} mismatches, first '{}'", mismatches, first));
    o.expect(elapsed < 1.0, fmt::format("took {:.3f} s", elapsed));
    if (o.pass)
        o.detail = fmt::format("{} names agree, {:.3f} s", names.size(), elapsed);
    return o;
}

// ---------------------------------------------------------------------------

Outcome matrix()
{
    Outcome o;
    const auto table = build::ToolchainTable::defaults();
    for (auto variant : {BuildVariant::Bad, BuildVariant::Good}) {
        const std::string omit = variant == BuildVariant::Bad ? "OMITGOOD" : "OMITBAD";
        const auto six = build::plan_matrix("paper-six", variant);
        std::set<std::tuple<std::string, Architecture, Optimization>> got;
        for (const auto& c : six)
            got.insert({c.compiler, c.architecture, c.optimization});
        const std::set<std::tuple<std::string, Architecture, Optimization>> want{
            {"gcc", Architecture::X86, Optimization::O0},       {"gcc", Architecture::X86, Optimization::O3},
            {"clang", Architecture::X86, Optimization::O0},     {"clang", Architecture::X86, Optimization::O3},
            {"cross-gcc", Architecture::Arm, Optimization::O0}, {"cross-gcc", Architecture::Arm, Optimization::O3}};
        o.expect(six.size() == 6 && got == want, "paper-six cells differ");

        // The quoted command lines: compiler binary, -O level, INCLUDEMAIN and the variant define.
        auto unit = SourceUnit::from_text("testcases/CWE1_x.c", "int main(void){return 0;}\n");
        build::BuildPlan plan{unit, six, {}, {}};
        for (const auto& c : six) {
            const auto* tc = table.find(c.compiler, c.architecture);
            o.expect(tc != nullptr, "no toolchain for " + cell_name(c));
            if (!tc)
                continue;
            const auto argv = build::compile_command(plan, c, *tc, "bin", true);
            const std::string expected_cc = c.compiler == "cross-gcc" ? "aarch64-linux-gnu-gcc" : c.compiler;
            auto has = [&](const std::string& a) { return std::find(argv.begin(), argv.end(), a) != argv.end(); };
            auto has_define = [&](const std::string& d) {
                for (std::size_t i = 0; i < argv.size(); ++i) {
                    if (argv[i] == "-D" + d || (argv[i] == "-D" && i + 1 < argv.size() && argv[i + 1] == d))
                        return true;
                }
                return false;
            };
            o.expect(argv.front() == expected_cc, cell_name(c) + " runs " + argv.front());
            o.expect(has(c.optimization == Optimization::O0 ? "-O0" : "-O3"), cell_name(c) + " optimization flag");
            o.expect(has_define("INCLUDEMAIN") && has_define(omit), cell_name(c) + " defines");
            o.expect(has("-s"), cell_name(c) + " not stripped");
        }

        const auto sixteen = build::plan_matrix("full-sixteen", variant);
        std::set<std::string> names;
        for (const auto& c : sixteen)
            names.insert(cell_name(c));
        o.expect(sixteen.size() == 16 && names.size() == 16, "full-sixteen does not hold 16 distinct cells");
        for (const auto* cells : {&six, &sixteen}) {
            for (const auto& c : *cells) {
                const auto name = cell_name(c);
                o.expect(name.find("O1") == std::string::npos && name.find("O2") == std::string::npos,
                         "intermediate optimization level in " + name);
            }
        }
    }
    if (o.pass)
        o.detail = "paper-six = 6 cells, full-sixteen = 16, only O0/O3";
    return o;
}

// ---------------------------------------------------------------------------

Outcome pools()
{
    Outcome o;
    const auto& pools = llm::bundled_instruction_pools();
    std::size_t total = 0;
    for (auto task : kAllTasks) {
        auto it = pools.find(task);
        const std::size_t n = it == pools.end() ? 0 : std::set<std::string>(it->second.begin(), it->second.end()).size();
        o.expect(n == 20, fmt::format("{} pool holds {} distinct templates", to_string(task), n));
        total += it == pools.end() ? 0 : it->second.size();
    }
    o.expect(pools.size() == 4 && total == 80, fmt::format("{} pools, {} templates", pools.size(), total));
    if (o.pass)
        o.detail = "4 tasks x 20 = 80 templates";
    return o;
}

// ---------------------------------------------------------------------------

std::vector<CorpusRecord> synthetic_records(std::size_t n, double post_cutoff_share, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::vector<CorpusRecord> out;
    const auto before = *parse_date("2020-06-01");
    const auto after = *parse_date("2022-06-01");
    const std::size_t post = static_cast<std::size_t>(std::lround(n * post_cutoff_share));
    std::size_t group = 0;
    while (out.size() < n) {
        // Source functions contribute one to three records (different cells or tasks).
        const bool late = out.size() < post;
        // Groups never straddle the late/early boundary, so the late share is exact.
        const std::size_t room = late ? post - out.size() : n - out.size();
        const std::size_t size = std::min<std::size_t>(1 + rng() % 3, room);
        for (std::size_t k = 0; k < size && out.size() < n; ++k) {
            CorpusRecord r;
            r.id = fmt::format("{:016x}", out.size());
            r.provenance = late ? Provenance::Nvd : Provenance::Sard;
            r.source_path = fmt::format("src/unit{}.c", group);
            r.func_name = fmt::format("f{}", group);
            r.source_code = "int f(void){return 0;}";
            r.decompiled_code = "int FUN_00101000(void){return 0;}";
            r.compiler = "gcc";
            r.optimization = k % 2 ? Optimization::O3 : Optimization::O0;
            r.task = TaskKind::Identify;
            r.instruction = "Is this function vulnerable?";
            r.output = "No";
            if (late)
                r.published_date = after;
            else if (rng() % 2)
                r.published_date = before;
            out.push_back(std::move(r));
        }
        ++group;
    }
    std::shuffle(out.begin(), out.end(), rng);
    return out;
}

Outcome split_criterion()
{
    Outcome o;
    const auto records = synthetic_records(1000, 0.30, 11);
    instruct::SplitOptions options;
    options.ratios = {0.8, 0.1, 0.1};
    options.seed = 3;
    std::vector<std::vector<CorpusRecord>> runs;
    try {
        for (int i = 0; i < 3; ++i)
            runs.push_back(instruct::split(records, options).records);
    } catch (const Error& e) {
        o.expect(false, std::string("split refused: ") + e.what() +
                            " (300 post-cutoff records must go to VAL+TEST, which hold 200 +/- 2)");
        return o;
    }
    std::array<std::size_t, 3> counts{};
    std::size_t late_in_train = 0;
    std::map<std::string, std::set<Split>> groups;
    for (const auto& r : runs[0]) {
        const auto s = *r.split;
        ++counts[s == Split::Train ? 0 : s == Split::Val ? 1 : 2];
        late_in_train += s == Split::Train && r.published_date && *r.published_date > *parse_date("2021-12-31");
        groups[r.source_path + "\n" + r.func_name].insert(s);
    }
    auto near = [](std::size_t got, std::size_t want) { return got + 1 >= want && got <= want + 1; };
    o.expect(near(counts[0], 800) && near(counts[1], 100) && near(counts[2], 100),
             fmt::format("counts {}/{}/{}", counts[0], counts[1], counts[2]));
    o.expect(late_in_train == 0, fmt::format("{} post-cutoff records in TRAIN", late_in_train));
    std::size_t spanning = 0;
    for (const auto& [g, s] : groups)
        spanning += s.size() > 1;
    o.expect(spanning == 0, fmt::format("{} groups span splits", spanning));
    o.expect(runs[0] == runs[1] && runs[1] == runs[2], "reruns differ");
    if (o.pass)
        o.detail = fmt::format("{}/{}/{}", counts[0], counts[1], counts[2]);
    return o;
}

// ---------------------------------------------------------------------------

Outcome metric_oracles()
{
    Outcome o;
    std::mt19937_64 rng(5);
    const std::vector<std::string> vocab{"the", "buffer", "copy", "size", "len", "data", "free", "ptr", "null", "loop"};
    auto tokens = [&](std::size_t lo, std::size_t hi) {
        std::vector<std::string> t(lo + rng() % (hi - lo + 1));
        for (auto& w : t)
            w = vocab[rng() % vocab.size()];
        return t;
    };
    const eval::HashEmbedder embedder(16, 9);
    double dev_rouge = 0, dev_bleu = 0, dev_cos = 0, dev_bert = 0;
    const auto start = Clock::now();
    for (int i = 0; i < 500; ++i) {
        auto c = tokens(0, 12), r = tokens(0, 12);
        dev_rouge = std::max(dev_rouge, std::abs(eval::rouge_l(c, r) - oracle::rouge_l(c, r)));

        c = tokens(0, 14);
        r = tokens(1, 14);
        const bool smooth = rng() % 2;
        eval::BleuOptions bo;
        bo.smoothing = smooth ? eval::BleuSmoothing::AddOneHigherOrder : eval::BleuSmoothing::None;
        dev_bleu = std::max(dev_bleu, std::abs(eval::bleu(c, r, bo) - oracle::bleu(c, r, 4, smooth)));

        c = tokens(1, 12);
        r = tokens(1, 12);
        dev_cos = std::max(dev_cos, std::abs(eval::cosine_similarity(c, r, embedder) -
                                             oracle::cosine_similarity(c, r, embedder)));

        const auto got = eval::bert_score(c, r, embedder);
        const auto want = oracle::bert_score(c, r, embedder);
        dev_bert = std::max({dev_bert, std::abs(got.precision - want.p), std::abs(got.recall - want.r),
                             std::abs(got.f1 - want.f)});
    }
    const double elapsed = seconds_since(start);
    o.expect(dev_rouge <= 1e-9, fmt::format("rouge_l deviates by {:g}", dev_rouge));
    o.expect(dev_bleu <= 1e-9, fmt::format("bleu deviates by {:g}", dev_bleu));
    o.expect(dev_cos <= 1e-12, fmt::format("cosine deviates by {:g}", dev_cos));
    o.expect(dev_bert <= 1e-9, fmt::format("bert_score deviates by {:g}", dev_bert));
    o.expect(elapsed < 30, fmt::format("took {:.1f} s", elapsed));
    if (o.pass)
        o.detail = fmt::format("max deviations rouge {:g}, bleu {:g}, cosine {:g}, bert {:g}; {:.2f} s", dev_rouge,
                               dev_bleu, dev_cos, dev_bert, elapsed);
    return o;
}

// ---------------------------------------------------------------------------

Outcome decomposition()
{
    Outcome o;
    std::mt19937_64 rng(17);
    std::size_t exact = 0;
    for (int i = 0; i < 1000; ++i) {
        eval::ConfusionCounts c{rng() % 60, rng() % 60, rng() % 60, rng() % 60};
        if (i % 10 == 0)
            c.tp = c.fn = 0;  // no vulnerable samples
        if (i % 10 == 1)
            c.tn = c.fp = 0;  // no benign samples
        if (c.total() == 0)
            c.tn = 1;
        const auto s = eval::score_confusion(c);
        const std::size_t nv = c.tp + c.fn, nb = c.tn + c.fp;
        // n_V * acc_v + n_B * acc_b over n_V + n_B, in integers: acc_v = tp/nv, acc_b = tn/nb.
        const auto& av = s.exact_acc_v;
        const auto& ab = s.exact_acc_b;
        const bool parts = (nv == 0 || (av.den == nv && av.num == c.tp)) && (nb == 0 || (ab.den == nb && ab.num == c.tn));
        const std::size_t weighted = (nv ? av.num : 0) + (nb ? ab.num : 0);
        const bool whole = s.exact_accuracy.den == nv + nb && s.exact_accuracy.num == weighted;
        const double lhs = s.accuracy;
        const double rhs = (static_cast<double>(nv) * s.acc_v + static_cast<double>(nb) * s.acc_b) / double(nv + nb);
        exact += parts && whole && std::abs(lhs - rhs) <= 1e-15;
    }
    o.expect(exact == 1000, fmt::format("{} of 1000 configurations decompose exactly", exact));

    std::vector<bool> gold;
    for (int i = 0; i < 37; ++i)
        gold.push_back(i % 3 == 0);
    const auto all_yes = eval::score_identification(std::vector<eval::Answer>(gold.size(), eval::Answer::Yes), gold);
    o.expect(all_yes.acc_v == 1.0 && all_yes.acc_b == 0.0,
             fmt::format("all-Yes acc_v {} acc_b {}", all_yes.acc_v, all_yes.acc_b));
    if (o.pass)
        o.detail = "1000/1000 exact; all-Yes acc_v=1, acc_b=0";
    return o;
}

// ---------------------------------------------------------------------------

Outcome grounding()
{
    Outcome o;
    // Raw outputs in the shapes chatty models produce, with the CWE a reader would take from each.
    const std::vector<std::pair<std::string, unsigned>> cases{
        {"CWE-121", 121},
        {"CWE-121: Stack-based Buffer Overflow", 121},
        {"CWE-787: Out-of-bounds Write. The function writes past the end of the buffer.", 787},
        {"CWE-416 (Use After Free)", 416},
        {"The vulnerability is CWE-476: NULL Pointer Dereference.", 476},
        {"**CWE-190** Integer Overflow or Wraparound", 190},
        {"`CWE-122`", 122},
        {"CWE-78 https://cwe.mitre.org/data/definitions/78.html", 78},
        {"See https://cwe.mitre.org/data/definitions/134.html for details: CWE-134", 134},
        {"cwe-401 memory leak", 401},
        {"CWE_415 double free", 415},
        {"CWE 369 divide by zero", 369},
        {"CWE369: Divide By Zero", 369},
        {"Answer: CWE-89\nDescription: SQL injection through unsanitized input.", 89},
        {"CWE-680\n\nThe integer overflow leads to a heap buffer overflow.", 680},
        {"Sure! The CWE is CWE-124 (Buffer Underwrite).", 124},
        {"This code is vulnerable to CWE-126: Buffer Over-read, see also CWE-125.", 126},
        {"CWE-23 Relative Path Traversal", 23},
        {"\"CWE-457\"", 457},
        {"'CWE-563'", 563},
        {"CWE-0121", 121},
        {"Category: CWE-762 Mismatched Memory Management Routines", 762},
        {"  \n  CWE-590  \n", 590},
        {"CWE-590: Free of Memory not on the Heap - https://cwe.mitre.org/data/definitions/590.html", 590},
        {"The function CWE121_Stack_Based_Buffer_Overflow__bad contains CWE-121.", 121},
        {"1. CWE-400 Uncontrolled Resource Consumption\n2. CWE-770", 400},
        {"CWE-761 [Free of Pointer not at Start of Buffer]", 761},
        {"Vulnerability type: Cwe-194 (Unexpected Sign Extension)", 194},
        {"CWE-197: Numeric Truncation Error (https://cwe.mitre.org/data/definitions/197.html)", 197},
        {"### CWE-253\nIncorrect Check of Function Return Value", 253},
        {"CWE-690 Unchecked Return Value to NULL Pointer Dereference. Fix: check malloc.", 690},
        {"The most fitting weakness is CWE-256, plaintext storage of a password.", 256},
        {"CWE-319: Cleartext Transmission of Sensitive Information", 319},
        {"CWE-36 Absolute Path Traversal", 36},
        {"Based on the decompiled code, CWE-427 Uncontrolled Search Path Element applies.", 427},
        {"<answer>CWE-506</answer>", 506},
        {"CWE-Stack overflow, i.e. CWE-121", 121},
        {"CWE-617 Reachable Assertion\nExplanation: assert(0) on user input.", 617},
        {"It is CWE-675. Duplicate Operations on Resource.", 675},
        {"CWE-843: Access of Resource Using Incompatible Type ('Type Confusion')", 843},
        {"CWE‑121 is not right; the answer is CWE-122", 122},
        {"CWE-Buffer? No: CWE-127 Buffer Under-read", 127},
        {"CWE-252\r\n", 252},
        {"[CWE-789](https://cwe.mitre.org/data/definitions/789.html) Memory Allocation with Excessive Size Value", 789},
        {"CWE-15 External Control of System or Configuration Setting", 15},
        {"CWE-114: Process Control", 114},
        {"Classification -> CWE-半 invalid, CWE-562", 562},
        {"CWE-665 Improper Initialization; CVSS 7.5", 665},
        {"I cannot determine a specific CWE for this function.", 0},
        {"The function is benign.", 0},
    };
    o.expect(cases.size() == 50, "case list is not 50 long");
    std::size_t agree = 0;
    std::string first;
    for (const auto& [raw, want] : cases) {
        const auto got = eval::parse_cwe(raw);
        const unsigned n = got ? got->number() : 0;
        if (n == want)
            ++agree;
        else if (first.empty())
            first = fmt::format("'{}' -> {}", raw, n);
    }
    o.expect(agree == cases.size(), fmt::format("{}/{} agree, first miss {}", agree, cases.size(), first));
    if (o.pass)
        o.detail = "50/50 agree";
    return o;
}

// ---------------------------------------------------------------------------

CorpusRecord dedup_record(std::string id, std::string source)
{
    CorpusRecord r;
    r.id = std::move(id);
    r.source_code = std::move(source);
    r.decompiled_code = "undefined8 FUN_00101000(void){return 0;}";
    r.compiler = "gcc";
    r.task = TaskKind::Identify;
    return r;
}

std::string fresh_name(std::mt19937_64& rng, std::set<std::string>& used)
{
    for (;;) {
        std::string s = "q";
        const std::size_t len = 3 + rng() % 6;
        for (std::size_t k = 0; k < len; ++k)
            s += static_cast<char>('a' + rng() % 26);
        if (used.insert(s).second)
            return s;
    }
}

// A function over four identifiers; shape and literals are what make two bases distinct.
std::string render(const std::array<std::string, 4>& ids, int k, char op, int shape)
{
    const auto& [f, a, b, t] = ids;
    switch (shape) {
    case 0:
        return fmt::format("int {}(int {}, int {}) {{ int {} = {} {} {}; return {} + {}; }}", f, a, b, t, a, op, b, t, k);
    case 1:
        return fmt::format("void {}(char *{}, int {}) {{ int {}; for ({} = 0; {} < {}; {}++) {}[{}] = {}; }}", f, a, b, t,
                           t, t, b, t, a, t, k);
    default:
        return fmt::format("int {}(int {}, int {}) {{ int {} = {}; if ({} {} {}) {{ {} = {}; }} return {}; }}", f, a, b, t,
                           k, a, op == '+' ? '>' : '<', b, t, b, t);
    }
}

Outcome dedup_criterion()
{
    Outcome o;
    {
        // The renamed-clone example: only the identifier differs.
        const std::vector<CorpusRecord> pair{
            dedup_record("a", "void srini_string(char *s) { char buf[10]; strcpy(buf, s); }"),
            dedup_record("b", "void string_srini(char *s) { char buf[10]; strcpy(buf, s); }")};
        const auto r = post::dedup(pair);
        o.expect(r.unique.size() == 1 && r.duplicates.size() == 1 && r.duplicates[0].id == "b",
                 "srini_string / string_srini did not collapse");
    }

    std::mt19937_64 rng(23);
    std::set<std::string> used;
    struct Base {
        std::array<std::string, 4> ids;
        int k;
        char op;
        int shape;
    };
    std::vector<Base> bases;
    std::set<std::tuple<int, char, int>> shapes;
    while (bases.size() < 700) {
        Base b{{fresh_name(rng, used), fresh_name(rng, used), fresh_name(rng, used), fresh_name(rng, used)},
               static_cast<int>(rng() % 5000),
               "+-*"[rng() % 3],
               static_cast<int>(rng() % 3)};
        // Mutation-distinct: literal, operator or shape differs from every other base.
        const char rendered_op = b.shape == 0 ? b.op : b.shape == 1 ? '+' : b.op == '+' ? '>' : '<';
        if (shapes.insert({b.k, rendered_op, b.shape}).second)
            bases.push_back(std::move(b));
    }
    std::vector<CorpusRecord> corpus;
    for (std::size_t i = 0; i < bases.size(); ++i)
        corpus.push_back(dedup_record(fmt::format("base{:04}", i), render(bases[i].ids, bases[i].k, bases[i].op, bases[i].shape)));
    std::shuffle(corpus.begin(), corpus.end(), rng);

    std::map<std::string, std::string> clone_of;
    std::vector<CorpusRecord> clones;
    while (clones.size() < 300) {
        const std::size_t i = rng() % bases.size();
        auto ids = bases[i].ids;
        for (auto& id : ids)
            id = fresh_name(rng, used);
        auto id = fmt::format("clone{:04}", clones.size());
        clone_of[id] = fmt::format("base{:04}", i);
        clones.push_back(dedup_record(id, render(ids, bases[i].k, bases[i].op, bases[i].shape)));
    }
    std::shuffle(clones.begin(), clones.end(), rng);
    corpus.insert(corpus.end(), clones.begin(), clones.end());

    const auto r = post::dedup(corpus, 4);
    std::size_t caught = 0, false_merges = 0;
    for (const auto& d : r.duplicates) {
        auto it = clone_of.find(d.id);
        if (it != clone_of.end() && it->second == d.kept_id)
            ++caught;
        else
            ++false_merges;
    }
    o.expect(caught == clones.size(), fmt::format("{} of {} clones caught", caught, clones.size()));
    o.expect(false_merges == 0, fmt::format("{} false merges", false_merges));
    o.expect(r.unique.size() == bases.size(), fmt::format("{} unique records, {} bases", r.unique.size(), bases.size()));
    const auto again = post::dedup(r.unique, 4);
    o.expect(again.duplicates.empty() && again.unique == r.unique, "dedup is not idempotent");
    if (o.pass)
        o.detail = fmt::format("{} records: {} clones caught, 0 false merges, idempotent", corpus.size(), caught);
    return o;
}

// ---------------------------------------------------------------------------

Outcome hermetic_pipeline()
{
    Outcome o;
    testing::TempDir out("acc9");
    const auto start = Clock::now();
    const auto run = process::run({testing::cli_path().string(), "pipeline", "--in", testing::corpus_dir().string(),
                                   "--out", out.path().string(), "--decompiler", "fixture", "--skip", "compile"});
    const double elapsed = seconds_since(start);
    o.expect(run.ok(), "pipeline exited with " + std::to_string(run.exit_code) + ": " + run.output);
    if (!run.ok())
        return o;

    const auto records = read_records(out / pipeline::files::kRecords);
    const auto& pools = llm::bundled_instruction_pools();
    std::size_t invalid = 0;
    std::map<std::string, std::size_t> per_task;
    for (const auto& r : records) {
        invalid += !validate_record(r, &pools).empty();
        ++per_task[std::string(to_string(r.task))];
    }
    const auto expected = pipeline::CorpusManifest::load(testing::corpus_dir()).expected;
    o.expect(invalid == 0, fmt::format("{} of {} records fail validation", invalid, records.size()));
    o.expect(!records.empty() && records.size() == expected.value("records", std::size_t{0}),
             fmt::format("{} records, manifest expects {}", records.size(), expected.value("records", 0)));
    const auto& want_tasks = expected["records_per_task"];
    o.expect(per_task.size() == want_tasks.size(), "task set differs from the manifest");
    for (const auto& [task, n] : per_task)
        o.expect(want_tasks.contains(task) && want_tasks[task] == n, "count for " + task + " differs from the manifest");

    const auto summary = Json::parse(run.output)["stages"];
    o.expect(summary["extract"]["functions"] == expected["functions"], "function count differs from the manifest");
    o.expect(summary["match"]["pairs"] == expected["pairs"], "pair count differs from the manifest");
    o.expect(elapsed < 10, fmt::format("took {:.2f} s", elapsed));
    if (o.pass)
        o.detail = fmt::format("{} records valid, counts match, {:.2f} s", records.size(), elapsed);
    return o;
}

// ---------------------------------------------------------------------------

Outcome record_prep()
{
    Outcome o;
    testing::TempDir out("acc10");
    pipeline::RunConfig config;
    config.in = testing::corpus_dir();
    config.out = out.path();
    config.decompiler = "fixture";
    config.skip = {"compile"};
    pipeline::run_pipeline(config);
    auto records = read_records(out / pipeline::files::kRecords);
    o.expect(!records.empty(), "no fixture records");

    const auto& tok = instruct::BpeTokenizer::bundled();
    std::size_t bad = 0;
    for (const auto& r : records) {
        const auto p = instruct::prepare(r, tok);
        const auto& ids = p.token_ids;
        bad += ids.empty() || ids.front() != tok.bos() || ids.back() != tok.eos() || ids.size() > 512;
    }
    o.expect(bad == 0, fmt::format("{} of {} prepared records malformed", bad, records.size()));

    std::size_t long_ok = 0;
    for (std::size_t i = 0; i < std::min<std::size_t>(records.size(), 20); ++i) {
        auto r = records[i];
        for (int k = 0; k < 300; ++k)
            r.decompiled_code += fmt::format("\n  local_{} = param_1[{}] ^ 0x{:x};", k, k, k * 7919);
        const auto p = instruct::prepare(r, tok);
        long_ok += p.token_ids.size() == 512 && p.truncated && p.token_ids.front() == tok.bos() &&
                   p.token_ids.back() == tok.eos();
    }
    o.expect(long_ok == std::min<std::size_t>(records.size(), 20), "over-length input not cut to exactly 512");
    if (o.pass)
        o.detail = fmt::format("{} records framed, over-length inputs -> 512 truncated", records.size());
    return o;
}

// ---------------------------------------------------------------------------

Outcome stripped_builds()
{
    Outcome o;
    if (!process::find_executable("gcc")) {
        o.skipped = true;
        o.detail = "gcc not on PATH";
        return o;
    }
    testing::TempDir out("acc11");
    auto unit = SourceUnit::load(testing::corpus_dir() / "testcases/CWE121_fixture.c");
    std::vector<std::string> names;
    for (const auto& f : extract::parse_functions(unit))
        names.push_back(extract::extract_name(f));

    std::vector<BuildConfig> cells;
    for (auto variant : {BuildVariant::Good, BuildVariant::Bad}) {
        for (const auto& c : build::plan_matrix("paper-six", variant))
            if (c.compiler == "gcc" && c.architecture == Architecture::X86)
                cells.push_back(c);
    }
    auto plan = build::make_plan(unit, cells, {testing::corpus_dir() / "testcasesupport"});
    build::CompileOptions options{build::ToolchainTable::defaults(), out.path()};
    const auto artifacts = build::compile_all(plan, options, 2);
    o.expect(artifacts.size() == 4, "expected four gcc/x86 cells");
    for (const auto& a : artifacts) {
        const auto cell = cell_name(a.config);
        o.expect(a.status == BuildStatus::Success, cell + " failed: " + a.log);
        if (a.status != BuildStatus::Success || !a.companion)
            continue;
        o.expect(build::verify_stripped(a, names), cell + " stripped binary still names a function");
        auto companion = a;
        companion.binary_path = a.companion->binary_path;
        o.expect(!build::verify_stripped(companion, names), cell + " companion lacks function names");
        if (variant_of(a.config) == BuildVariant::Bad) {
            for (const auto& [sym, addr] : a.companion->symbols) {
                std::string lower = sym;
                std::transform(lower.begin(), lower.end(), lower.begin(), ::tolower);
                o.expect(lower.find("good") == std::string::npos, cell + " companion has " + sym);
            }
            o.expect(a.companion->symbols.count("CWE121_fixture__bad") == 1, cell + " companion lacks the bad function");
        } else {
            o.expect(a.companion->symbols.count("CWE121_fixture__good") == 1, cell + " companion lacks the good function");
        }
    }
    if (o.pass)
        o.detail = "gcc/x86 O0,O3 x GOOD,BAD: stripped clean, companions named, OMITGOOD has no good symbols";
    return o;
}

const std::vector<std::pair<std::string, std::function<Outcome()>>> kCriteria{
    {"labeling oracle", labeling},
    {"matrix constants", matrix},
    {"instruction pools", pools},
    {"split", split_criterion},
    {"metric oracles", metric_oracles},
    {"accuracy decomposition", decomposition},
    {"cwe grounding", grounding},
    {"dedup", dedup_criterion},
    {"hermetic pipeline", hermetic_pipeline},
    {"record prep", record_prep},
    {"stripped builds", stripped_builds},
};

} // namespace

int main(int argc, char** argv)
{
    std::size_t first = 1, last = kCriteria.size();
    if (argc > 1) {
        first = last = std::strtoul(argv[1], nullptr, 10);
        if (first < 1 || first > kCriteria.size()) {
            std::cerr << "criterion must be 1.." << kCriteria.size() << "\n";
            return 2;
        }
    }
    int failed = 0, skipped = 0;
    for (std::size_t n = first; n <= last; ++n) {
        const auto& [name, check] = kCriteria[n - 1];
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        if (o.skipped) {
            ++skipped;
            std::cout << fmt::format("SKIP {:>2} {}: {}\n", n, name, o.detail);
            continue;
        }
        failed += !o.pass;
        std::cout << fmt::format("{} {:>2} {}: {}\n", o.pass ? "PASS" : "FAIL", n, name, o.detail);
    }
    if (failed)
        return 1;
    return first == last && skipped ? kSkip : 0;
}
