#include <doctest.h>

#include "debinforge/assets.hpp"
#include "debinforge/error.hpp"
#include "debinforge/extractor.hpp"
#include "support.hpp"

using namespace debinforge;
namespace ex = debinforge::extract;

namespace {

std::vector<ExtractedFunction> parse(std::string path, std::string text)
{
    return ex::parse_functions(SourceUnit::from_text(std::move(path), std::move(text)));
}

// Span of a definition that starts at `head` and closes at the first column-0 brace.
ByteSpan text_span(const std::string& text, std::string_view head)
{
    const auto begin = text.find(head);
    REQUIRE(begin != std::string::npos);
    const auto close = text.find("\n}", begin);
    REQUIRE(close != std::string::npos);
    return {static_cast<std::uint32_t>(begin), static_cast<std::uint32_t>(close + 2)};
}

} // namespace

TEST_CASE("prototypes are not definitions")
{
    auto fns = parse("a.c", "int proto(int);\nint f(void) { return 1; }\nstatic int g(int x) { return x; }\n");
    REQUIRE(fns.size() == 2);
    CHECK(fns[0].name == "f");
    CHECK(fns[1].name == "g");
}

TEST_CASE("empty file has no functions")
{
    CHECK(parse("empty.c", "").empty());
}

TEST_CASE("fixture CWE121 functions and spans")
{
    const auto path = testing::corpus_dir() / "testcases/CWE121_fixture.c";
    const auto unit = SourceUnit::load(path);
    const auto& text = unit.text;
    auto fns = ex::parse_functions(unit);

    // Hand count: bad, the static goodG2B helper, good, and the INCLUDEMAIN driver.
    REQUIRE(fns.size() == 4);
    const char* heads[] = {"void CWE121_fixture__bad()", "static void goodG2B()", "void CWE121_fixture__good()",
                           "int main(int argc"};
    const char* names[] = {"CWE121_fixture__bad", "goodG2B", "CWE121_fixture__good", "main"};
    for (int i = 0; i < 4; ++i) {
        CAPTURE(i);
        CHECK(fns[i].name == names[i]);
        CHECK(fns[i].span == text_span(text, heads[i]));
        CHECK(fns[i].text == text.substr(fns[i].span.begin, fns[i].span.size()));
        CHECK(fns[i].span.contains(fns[i].body_span));
        CHECK(text[fns[i].body_span.begin] == '{');
    }
    CHECK(fns[0].id != fns[1].id);
    CHECK(fns[0].id == function_id(text, fns[0].span));
}

TEST_CASE("extract_name")
{
    SUBCASE("plain") { CHECK(ex::extract_name(parse("a.c", "int CWE121_bad() { return 0; }")[0]) == "CWE121_bad"); }
    SUBCASE("pointer return keeps the innermost identifier")
    {
        auto f = parse("a.c", "static char * CWE476_helper_good(int n) { return 0; }")[0];
        CHECK(ex::extract_name(f) == "CWE476_helper_good");
    }
    SUBCASE("function pointer return")
    {
        auto f = parse("a.c", "int (*pick(int k))(int) { return 0; }")[0];
        CHECK(ex::extract_name(f) == "pick");
    }
    SUBCASE("K&R definition from the fixture corpus")
    {
        auto fns = ex::parse_functions(SourceUnit::load(testing::corpus_dir() / "testcases/CWE476_knr.c"));
        REQUIRE(fns.size() == 4);
        CHECK(fns[0].name == "CWE476_knr__bad");
        CHECK(fns[1].name == "goodB2G");
        CHECK(fns[0].text.find("    int count;\n{") != std::string::npos);
    }
    SUBCASE("C++ qualified and operator names")
    {
        auto fns = parse("a.cpp", "int ns::Widget::size() const { return 1; }\n"
                                  "bool operator==(const A&, const A&) { return true; }\n");
        REQUIRE(fns.size() == 2);
        CHECK(fns[0].name == "size");
    }
}

TEST_CASE("label_function follows the naming rule")
{
    auto l = ex::label_function("CWE121_Stack_Based_Buffer_Overflow_bad");
    REQUIRE(l.is_vulnerable());
    CHECK(l.cwe()->number() == 121);
    CHECK(ex::label_function("CWE590_free_memory_not_on_heap_goodG2B").is_benign());
    CHECK(ex::label_function("goodB2G").is_benign());
    auto both = ex::label_function("helper_badgood_mixed");
    REQUIRE(both.is_unknown());
    CHECK(both.reason() == "both good and bad markers");
    CHECK(ex::label_function("helper_bad").reason() == "bad marker without CWE prefix");
    CHECK(ex::label_function("main").reason() == "neither good nor bad marker");
    // Case-sensitive markers.
    CHECK(ex::label_function("CWE121_BAD").is_unknown());
    CHECK(ex::cwe_prefix("CWE0_bad") == std::nullopt);
    CHECK(ex::cwe_prefix("CWE78_OS_bad")->number() == 78);
}

TEST_CASE("comments")
{
    SUBCASE("single flaw comment")
    {
        auto f = parse("a.c", "void f(void) {\n  /* FLAW: overflow */\n  g();\n}\n")[0];
        auto cs = ex::extract_comments(f);
        REQUIRE(cs.size() == 1);
        CHECK(cs[0].text == "/* FLAW: overflow */");
    }
    SUBCASE("comment-free") { CHECK(ex::extract_comments(parse("a.c", "int f(){return 0;}")[0]).empty()); }
    SUBCASE("fixture bad function: block, line, block in order")
    {
        const auto unit = SourceUnit::load(testing::corpus_dir() / "testcases/CWE121_fixture.c");
        auto f = ex::parse_functions(unit)[0];
        auto cs = ex::extract_comments(f);
        REQUIRE(cs.size() == 3);
        CHECK(cs[0].text == "/* initialize source with a string longer than data */");
        CHECK(cs[1].text == "// data holds 10 bytes, source holds 20");
        CHECK(cs[2].text == "/* FLAW: no bounds check before the copy */");
        for (const auto& c : cs)
            CHECK(unit.text.substr(c.offset, c.text.size()) == c.text);
        CHECK(cs == f.comments);
    }
}

TEST_CASE("strip_comments")
{
    auto plain = parse("a.c", "int f(){return 0;}")[0];
    CHECK(ex::strip_comments(plain) == plain.text);
    CHECK(ex::strip_comments(parse("a.c", "int f(){/*x*/return 0;}")[0]) == "int f(){ return 0;}");

    SUBCASE("fixture golden")
    {
        const auto golden = read_json(testing::fixture_dir() / "golden/CWE121_fixture.stripped.json");
        auto fns = ex::parse_functions(SourceUnit::load(testing::corpus_dir() / "testcases/CWE121_fixture.c"));
        REQUIRE(fns.size() == golden.size());
        for (const auto& f : fns) {
            CAPTURE(f.name);
            CHECK(ex::strip_comments(f) == golden.at(f.name).get<std::string>());
        }
    }
}

TEST_CASE("syntax errors are reported, neighbours survive")
{
    auto unit = SourceUnit::from_text("a.c", "int ok(void) { return 1; }\nint broken(void) { return (; }\nint ok2(void) { return 2; }\n");
    ex::FunctionExtractor extractor;
    auto result = extractor.parse_functions(unit);
    std::vector<std::string> names;
    for (const auto& f : result.functions)
        names.push_back(f.name);
    CHECK(names == std::vector<std::string>{"ok", "ok2"});
    CHECK_FALSE(result.diagnostics.empty());
}

TEST_CASE("grammar query asset matches the builtin set")
{
    CHECK(ex::GrammarQueries::load(asset_path("grammar_queries.json")) == ex::GrammarQueries::builtin());
    testing::TempDir dir;
    auto doc = read_json(asset_path("grammar_queries.json"));
    doc.erase(doc.begin());
    write_json(dir / "q.json", doc);
    CHECK_THROWS_AS(ex::GrammarQueries::load(dir / "q.json"), Error);
}

TEST_CASE("unsupported suffix")
{
    CHECK_THROWS_AS(SourceUnit::from_text("a.py", "x"), Error);
    CHECK(SourceUnit::from_text("a.cpp", "").info.language == Language::Cpp);
}
