#include <doctest.h>

#include <map>
#include <sstream>

#include "oskp/papers.hpp"

using namespace oskp;

namespace {

ProblemSpec problem(const std::string& id, Source source) {
  return ProblemSpec{id, source, source};
}

}  // namespace

TEST_SUITE("papers") {

TEST_CASE("template catalogs are what they claim") {
  const auto& medium = medium_templates();
  REQUIRE(medium.size() == 3);
  CHECK(medium[0].slots == std::array<Source, 3>{Source::Med, Source::Easy, Source::Med});
  CHECK(medium[1].slots == std::array<Source, 3>{Source::Med, Source::Easy, Source::Hard});
  CHECK(medium[2].slots == std::array<Source, 3>{Source::Hard, Source::Med, Source::Easy});

  const auto& hard = hard_templates();
  REQUIRE(hard.size() == 2);
  CHECK(hard[0].slots == std::array<Source, 3>{Source::Hard, Source::Med, Source::Easy});
  CHECK(hard[1].slots == std::array<Source, 3>{Source::Hard, Source::Med, Source::Med});
  for (const PaperTemplate& tpl : hard) CHECK(tpl.slots[0] == Source::Hard);
}

TEST_CASE("pools cycle deterministically once exhausted") {
  SourcePool pool({problem("e0", Source::Easy), problem("e1", Source::Easy)},
                  {problem("m0", Source::Med)}, {problem("h0", Source::Hard)}, 5);
  const std::string first = pool.take(Source::Easy).id;
  const std::string second = pool.take(Source::Easy).id;
  CHECK(first != second);
  // Cursor wraps: the rotation repeats with period two.
  CHECK(pool.take(Source::Easy).id == first);
  CHECK(pool.take(Source::Easy).id == second);
  CHECK(pool.take(Source::Med).id == "m0");
  CHECK(pool.take(Source::Med).id == "m0");
}

TEST_CASE("an absent pool refuses to deal") {
  SourcePool pool({problem("e0", Source::Easy)}, {}, {}, 1);
  CHECK_THROWS_AS(pool.take(Source::Med), EmptyPool);
  CHECK_THROWS_WITH_AS(pool.take(Source::Hard), "EmptyPool: no 'hard' problems", EmptyPool);
}

TEST_CASE("synthetic pools hold per-source problems with stable ids") {
  SourcePool pool = SourcePool::synthetic(4, 0);
  CHECK(pool.size(Source::Easy) == 4);
  CHECK(pool.size(Source::Hard) == 4);
  const ProblemSpec taken = pool.take(Source::Hard);
  CHECK(taken.source == Source::Hard);
  CHECK(taken.difficulty == Source::Hard);
  CHECK(taken.id.rfind("hard-", 0) == 0);
}

TEST_CASE("generated papers follow their setting's templates") {
  SourcePool pool = SourcePool::synthetic(50, 3);
  const std::vector<TestPaper> papers = generate_papers(pool, Setting::Hard, 40, 3);
  REQUIRE(papers.size() == 40);
  for (const TestPaper& paper : papers) {
    REQUIRE(paper.problems.size() == 3);
    CHECK(paper.setting == Setting::Hard);
    CHECK(paper.variant == Variant::Original);
    CHECK(paper.problems[0].source == Source::Hard);
    CHECK(paper.problems[1].source == Source::Med);
    const Source last = paper.problems[2].source;
    CHECK((last == Source::Easy || last == Source::Med));
  }
  CHECK(papers[0].paper_id == "h-000000");
  CHECK(papers[7].paper_id == "h-000007");
}

TEST_CASE("generation is reproducible and seed-sensitive") {
  SourcePool pool_a = SourcePool::synthetic(30, 9);
  SourcePool pool_b = SourcePool::synthetic(30, 9);
  const std::vector<TestPaper> a = generate_papers(pool_a, Setting::Medium, 20, 9);
  const std::vector<TestPaper> b = generate_papers(pool_b, Setting::Medium, 20, 9);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(to_json_line(a[i]) == to_json_line(b[i]));
  }

  SourcePool pool_c = SourcePool::synthetic(30, 10);
  const std::vector<TestPaper> c = generate_papers(pool_c, Setting::Medium, 20, 10);
  bool any_difference = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (to_json_line(a[i]) != to_json_line(c[i])) any_difference = true;
  }
  CHECK(any_difference);
}

TEST_CASE("small pools rotate problems across papers in a fixed cycle") {
  SourcePool pool(
      {problem("e0", Source::Easy), problem("e1", Source::Easy)},
      {problem("m0", Source::Med), problem("m1", Source::Med)},
      {problem("h0", Source::Hard), problem("h1", Source::Hard)}, 4);
  const std::vector<TestPaper> papers = generate_papers(pool, Setting::Medium, 4, 4);
  REQUIRE(papers.size() == 4);

  std::map<Source, std::vector<std::string>> draws;
  for (const TestPaper& paper : papers) {
    for (const ProblemSpec& spec : paper.problems) draws[spec.source].push_back(spec.id);
  }
  for (const auto& [source, ids] : draws) {
    (void)source;
    for (std::size_t k = 2; k < ids.size(); ++k) CHECK(ids[k] == ids[k - 2]);
  }
}

TEST_CASE("papers with repeated sources need a pool of at least two") {
  SourcePool pool({problem("e0", Source::Easy)}, {problem("m0", Source::Med)},
                  {problem("h0", Source::Hard)}, 2);
  const std::vector<PaperTemplate> doubled{{{Source::Med, Source::Easy, Source::Med}}};
  CHECK_THROWS_AS(generate_papers(pool, doubled, Setting::Medium, 1, 2),
                  std::invalid_argument);
}

TEST_CASE("easy variants sort easiest first and keep identities") {
  TestPaper paper;
  paper.paper_id = "m-000000";
  paper.setting = Setting::Medium;
  paper.problems = {problem("a", Source::Med), problem("b", Source::Easy),
                    problem("c", Source::Med)};
  const TestPaper easy = easy_variant(paper);
  CHECK(easy.paper_id == paper.paper_id);
  CHECK(easy.variant == Variant::Easy);
  REQUIRE(easy.problems.size() == 3);
  CHECK(easy.problems[0].id == "b");
  // Stable sort: the two medium problems keep their relative order.
  CHECK(easy.problems[1].id == "a");
  CHECK(easy.problems[2].id == "c");

  CHECK_THROWS_AS(easy_variant(easy), AlreadyEasy);

  TestPaper sorted;
  sorted.paper_id = "m-000001";
  sorted.problems = {problem("x", Source::Easy), problem("y", Source::Med),
                     problem("z", Source::Hard)};
  CHECK_THROWS_AS(easy_variant(sorted), AlreadyEasy);
}

TEST_CASE("paper lines survive a round trip") {
  SourcePool pool = SourcePool::synthetic(10, 21);
  const std::vector<TestPaper> papers = generate_papers(pool, Setting::Hard, 6, 21);
  std::stringstream buffer;
  std::vector<TestPaper> both;
  for (const TestPaper& paper : papers) {
    both.push_back(paper);
    both.push_back(easy_variant(paper));
  }
  write_papers_jsonl(buffer, both);

  const std::vector<TestPaper> reread = read_papers_jsonl(buffer);
  REQUIRE(reread.size() == both.size());
  for (std::size_t i = 0; i < both.size(); ++i) {
    CHECK(to_json_line(reread[i]) == to_json_line(both[i]));
    CHECK(reread[i].variant == both[i].variant);
  }
}

TEST_CASE("malformed paper lines are refused with line numbers") {
  SUBCASE("not JSON") {
    CHECK_THROWS_AS(paper_from_json_line("not json"), std::invalid_argument);
  }
  SUBCASE("missing key") {
    CHECK_THROWS_AS(paper_from_json_line(R"({"paper_id":"p","setting":"hard"})"),
                    std::invalid_argument);
  }
  SUBCASE("bad source") {
    CHECK_THROWS_AS(
        paper_from_json_line(
            R"({"paper_id":"p","setting":"hard","variant":"original","problems":[{"id":"a","source":"tricky"}]})"),
        std::invalid_argument);
  }
  SUBCASE("empty problems") {
    CHECK_THROWS_AS(
        paper_from_json_line(
            R"({"paper_id":"p","setting":"hard","variant":"original","problems":[]})"),
        std::invalid_argument);
  }
  SUBCASE("duplicate problem ids") {
    CHECK_THROWS_AS(
        paper_from_json_line(
            R"({"paper_id":"p","setting":"hard","variant":"original","problems":[{"id":"a","source":"med"},{"id":"a","source":"easy"}]})"),
        std::invalid_argument);
  }
  SUBCASE("line numbers in stream errors") {
    std::stringstream buffer;
    buffer << R"({"paper_id":"p","setting":"hard","variant":"original","problems":[{"id":"a","source":"med"}]})"
           << "\nbroken\n";
    CHECK_THROWS_WITH_AS(read_papers_jsonl(buffer),
                         doctest::Contains("line 2"), std::invalid_argument);
  }
}

}  // TEST_SUITE
