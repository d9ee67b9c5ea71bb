#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "roughdyadic/verify.hpp"

namespace roughdyadic {

/// Fixed-format CSV of estimate rows (no timestamps; identical runs produce
/// identical bytes).
void write_rows_csv(std::ostream& os, const std::vector<EstimateRow>& rows);

/// One line per lemma check: lemma_id,anchor,check,verdict,detail.
void write_verdicts_csv(std::ostream& os, const std::vector<LemmaReport>& reports);
std::vector<std::pair<std::string, std::string>> read_verdicts_csv(std::istream& is);

/// Standalone SVG: log2(estimate) against the sweep index, one series per
/// row group, data embedded as comments.
void write_lemma_svg(std::ostream& os, const LemmaReport& report);

std::string build_identifier();

}  // namespace roughdyadic
