#pragma once

/**
 * Test-paper construction.
 *
 * A paper is an ordered triple of problems drawn from easy/med/hard source
 * pools according to a difficulty template. Each generated paper comes in
 * two variants: the original, and an "easy" counterpart with the same
 * problems reordered easiest-first (a lower bound on how much the ordering
 * itself costs a budgeted solver). Papers round-trip through JSON Lines.
 */

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "oskp/domain.hpp"

namespace oskp {

enum class Setting : int { Medium = 0, Hard = 1 };
enum class Variant : int { Original = 0, Easy = 1 };

const char* to_string(Setting setting);
Setting setting_from_string(const std::string& text);
const char* to_string(Variant variant);
Variant variant_from_string(const std::string& text);

/// Difficulty pattern for one paper, first problem first.
struct PaperTemplate {
  std::array<Source, 3> slots;
};

/// Medium setting: mostly front-loaded medium difficulty.
const std::vector<PaperTemplate>& medium_templates();
/// Hard setting: every paper opens with a hard problem.
const std::vector<PaperTemplate>& hard_templates();

struct TestPaper {
  std::string paper_id;
  std::vector<ProblemSpec> problems;
  Setting setting = Setting::Medium;
  Variant variant = Variant::Original;
};

/// A source pool ran out of problems.
struct EmptyPool : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Paper is already in easiest-first order; making an easy variant of it
/// would be a no-op and almost certainly a caller bug.
struct AlreadyEasy : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/**
 * Problem pools, one per source difficulty. Each pool is shuffled once at
 * construction (seeded); take() then walks it with a cyclic cursor, so a
 * pool smaller than the demand is reused in a fixed rotation rather than
 * resampled.
 */
class SourcePool {
 public:
  SourcePool(std::vector<ProblemSpec> easy, std::vector<ProblemSpec> med,
             std::vector<ProblemSpec> hard, std::uint64_t seed);

  /// Pools of `per_source` synthetic problems each, ids "<source><index>".
  static SourcePool synthetic(std::size_t per_source, std::uint64_t seed);

  /// Next problem of the given source. Throws EmptyPool if that pool has
  /// no problems at all.
  ProblemSpec take(Source source);

  std::size_t size(Source source) const;

 private:
  std::array<std::vector<ProblemSpec>, kNumSources> pools_;
  std::array<std::size_t, kNumSources> cursors_{};
};

/// Generates `count` original-variant papers for a setting, choosing one of
/// the setting's templates uniformly per paper. Paper ids are
/// "<m|h>-<index>" with a fixed-width index.
std::vector<TestPaper> generate_papers(SourcePool& pool, Setting setting, std::size_t count,
                                       std::uint64_t seed);

/// Same, against an explicit template list (must be non-empty).
std::vector<TestPaper> generate_papers(SourcePool& pool,
                                       const std::vector<PaperTemplate>& templates,
                                       Setting setting, std::size_t count,
                                       std::uint64_t seed);

/// Easy variant: identical problems, stably sorted easiest source first.
/// Keeps the paper id, flips the variant tag. Throws AlreadyEasy when the
/// order would not change.
TestPaper easy_variant(const TestPaper& paper);

// ============================================================================
// JSON Lines serialization
// ============================================================================

/// One line, no trailing newline:
/// {"paper_id":...,"problems":[{"id":...,"source":...}],"setting":...,"variant":...}
std::string to_json_line(const TestPaper& paper);

/// Parses one line; throws std::invalid_argument on schema violations.
TestPaper paper_from_json_line(const std::string& line);

void write_papers_jsonl(std::ostream& out, const std::vector<TestPaper>& papers);
std::vector<TestPaper> read_papers_jsonl(std::istream& in);

}  // namespace oskp
