#include "oskp/papers.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <ostream>
#include <unordered_set>

#include <json.hpp>

#include "oskp/rng.hpp"

namespace oskp {
namespace {

using nlohmann::json;

std::string format_index(std::size_t index) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%06zu", index);
  return std::string(buf);
}

void shuffle(std::vector<ProblemSpec>& pool, rng::Stream& stream) {
  for (std::size_t i = pool.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(stream.next_below(i));
    std::swap(pool[i - 1], pool[j]);
  }
}

void check_unique_ids(const TestPaper& paper) {
  std::unordered_set<std::string> seen;
  for (const ProblemSpec& problem : paper.problems) {
    if (!seen.insert(problem.id).second) {
      throw std::invalid_argument("paper '" + paper.paper_id + "' repeats problem id '" +
                                  problem.id + "' (source pool too small for the template)");
    }
  }
}

}  // namespace

const char* to_string(Setting setting) {
  switch (setting) {
    case Setting::Medium: return "medium";
    case Setting::Hard: return "hard";
  }
  throw std::invalid_argument("unknown Setting");
}

Setting setting_from_string(const std::string& text) {
  if (text == "medium") return Setting::Medium;
  if (text == "hard") return Setting::Hard;
  throw std::invalid_argument("unknown setting name: '" + text + "'");
}

const char* to_string(Variant variant) {
  switch (variant) {
    case Variant::Original: return "original";
    case Variant::Easy: return "easy";
  }
  throw std::invalid_argument("unknown Variant");
}

Variant variant_from_string(const std::string& text) {
  if (text == "original") return Variant::Original;
  if (text == "easy") return Variant::Easy;
  throw std::invalid_argument("unknown variant name: '" + text + "'");
}

const std::vector<PaperTemplate>& medium_templates() {
  static const std::vector<PaperTemplate> templates{
      PaperTemplate{{Source::Med, Source::Easy, Source::Med}},
      PaperTemplate{{Source::Med, Source::Easy, Source::Hard}},
      PaperTemplate{{Source::Hard, Source::Med, Source::Easy}},
  };
  return templates;
}

const std::vector<PaperTemplate>& hard_templates() {
  static const std::vector<PaperTemplate> templates{
      PaperTemplate{{Source::Hard, Source::Med, Source::Easy}},
      PaperTemplate{{Source::Hard, Source::Med, Source::Med}},
  };
  return templates;
}

SourcePool::SourcePool(std::vector<ProblemSpec> easy, std::vector<ProblemSpec> med,
                       std::vector<ProblemSpec> hard, std::uint64_t seed) {
  pools_[static_cast<int>(Source::Easy)] = std::move(easy);
  pools_[static_cast<int>(Source::Med)] = std::move(med);
  pools_[static_cast<int>(Source::Hard)] = std::move(hard);
  for (int s = 0; s < kNumSources; ++s) {
    rng::Stream stream = rng::stream(seed, "pool", to_string(static_cast<Source>(s)));
    shuffle(pools_[s], stream);
  }
}

SourcePool SourcePool::synthetic(std::size_t per_source, std::uint64_t seed) {
  std::array<std::vector<ProblemSpec>, kNumSources> pools;
  for (int s = 0; s < kNumSources; ++s) {
    Source source = static_cast<Source>(s);
    pools[s].reserve(per_source);
    for (std::size_t i = 0; i < per_source; ++i) {
      pools[s].push_back(ProblemSpec{std::string(to_string(source)) + "-" + format_index(i),
                                     source, source});
    }
  }
  return SourcePool(std::move(pools[0]), std::move(pools[1]), std::move(pools[2]), seed);
}

ProblemSpec SourcePool::take(Source source) {
  std::vector<ProblemSpec>& pool = pools_[static_cast<int>(source)];
  if (pool.empty()) {
    throw EmptyPool(std::string("EmptyPool: no '") + to_string(source) + "' problems");
  }
  std::size_t& cursor = cursors_[static_cast<int>(source)];
  const ProblemSpec& problem = pool[cursor % pool.size()];
  ++cursor;
  return problem;
}

std::size_t SourcePool::size(Source source) const {
  return pools_[static_cast<int>(source)].size();
}

std::vector<TestPaper> generate_papers(SourcePool& pool, Setting setting, std::size_t count,
                                       std::uint64_t seed) {
  const std::vector<PaperTemplate>& templates =
      setting == Setting::Medium ? medium_templates() : hard_templates();
  return generate_papers(pool, templates, setting, count, seed);
}

std::vector<TestPaper> generate_papers(SourcePool& pool,
                                       const std::vector<PaperTemplate>& templates,
                                       Setting setting, std::size_t count,
                                       std::uint64_t seed) {
  if (templates.empty()) throw std::invalid_argument("generate_papers: no templates");
  rng::Stream template_stream = rng::stream(seed, "templates", to_string(setting));
  std::vector<TestPaper> papers;
  papers.reserve(count);
  const char* prefix = setting == Setting::Medium ? "m" : "h";
  for (std::size_t i = 0; i < count; ++i) {
    const PaperTemplate& tpl =
        templates[static_cast<std::size_t>(template_stream.next_below(templates.size()))];
    TestPaper paper;
    paper.paper_id = std::string(prefix) + "-" + format_index(i);
    paper.setting = setting;
    paper.variant = Variant::Original;
    paper.problems.reserve(tpl.slots.size());
    for (Source slot : tpl.slots) paper.problems.push_back(pool.take(slot));
    check_unique_ids(paper);
    papers.push_back(std::move(paper));
  }
  return papers;
}

TestPaper easy_variant(const TestPaper& paper) {
  if (paper.variant == Variant::Easy) {
    throw AlreadyEasy("AlreadyEasy: paper '" + paper.paper_id + "' is already the easy variant");
  }
  TestPaper easy = paper;
  std::stable_sort(easy.problems.begin(), easy.problems.end(),
                   [](const ProblemSpec& a, const ProblemSpec& b) {
                     return static_cast<int>(a.source) < static_cast<int>(b.source);
                   });
  bool reordered = false;
  for (std::size_t i = 0; i < paper.problems.size(); ++i) {
    if (easy.problems[i].id != paper.problems[i].id) {
      reordered = true;
      break;
    }
  }
  if (!reordered) {
    throw AlreadyEasy("AlreadyEasy: paper '" + paper.paper_id + "' is already easiest-first");
  }
  easy.variant = Variant::Easy;
  return easy;
}

std::string to_json_line(const TestPaper& paper) {
  json problems = json::array();
  for (const ProblemSpec& problem : paper.problems) {
    problems.push_back(json{{"id", problem.id}, {"source", to_string(problem.source)}});
  }
  json line{{"paper_id", paper.paper_id},
            {"setting", to_string(paper.setting)},
            {"variant", to_string(paper.variant)},
            {"problems", std::move(problems)}};
  return line.dump();
}

TestPaper paper_from_json_line(const std::string& line) {
  json parsed;
  try {
    parsed = json::parse(line);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("paper line is not valid JSON: ") + e.what());
  }
  if (!parsed.is_object()) throw std::invalid_argument("paper line is not a JSON object");
  for (const char* key : {"paper_id", "setting", "variant", "problems"}) {
    if (!parsed.contains(key)) {
      throw std::invalid_argument(std::string("paper line missing key '") + key + "'");
    }
  }
  TestPaper paper;
  if (!parsed["paper_id"].is_string()) throw std::invalid_argument("paper_id must be a string");
  paper.paper_id = parsed["paper_id"].get<std::string>();
  paper.setting = setting_from_string(parsed["setting"].get<std::string>());
  paper.variant = variant_from_string(parsed["variant"].get<std::string>());
  if (!parsed["problems"].is_array() || parsed["problems"].empty()) {
    throw std::invalid_argument("problems must be a non-empty array");
  }
  for (const json& entry : parsed["problems"]) {
    if (!entry.is_object() || !entry.contains("id") || !entry.contains("source") ||
        !entry["id"].is_string() || !entry["source"].is_string()) {
      throw std::invalid_argument("each problem needs string fields 'id' and 'source'");
    }
    ProblemSpec problem;
    problem.id = entry["id"].get<std::string>();
    problem.source = source_from_string(entry["source"].get<std::string>());
    problem.difficulty = problem.source;
    paper.problems.push_back(std::move(problem));
  }
  check_unique_ids(paper);
  return paper;
}

void write_papers_jsonl(std::ostream& out, const std::vector<TestPaper>& papers) {
  for (const TestPaper& paper : papers) out << to_json_line(paper) << '\n';
}

std::vector<TestPaper> read_papers_jsonl(std::istream& in) {
  std::vector<TestPaper> papers;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    try {
      papers.push_back(paper_from_json_line(line));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("line " + std::to_string(line_number) + ": " + e.what());
    }
  }
  return papers;
}

}  // namespace oskp
