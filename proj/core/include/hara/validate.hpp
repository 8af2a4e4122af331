#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "hara/domain.hpp"

namespace hara {

// Re-parses an exported review CSV and checks the domain invariants that
// must hold in every table: the frozen header, id uniqueness, valid
// guideword and severity tokens, safety-goal gating, and deterministic
// (quadrant, id) row order. Violations are data; parsing the file itself
// never throws on arbitrary text.
std::vector<Violation> validate_exported_csv(std::string_view csv_text);

}  // namespace hara
