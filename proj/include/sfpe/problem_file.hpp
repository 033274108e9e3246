#pragma once

#include <istream>
#include <optional>
#include <string>

#include "sfpe/problem.hpp"
#include "sfpe/verification.hpp"

namespace sfpe {

/// A problem read from a `[section]` / `key = value` text file.
///
/// Sections: [problem] (name), [coefficients], [domain], [terminal],
/// [nonlinearity], [lyapunov], and optionally [solution]. With [solution] the
/// nonlinearity is manufactured so that the named family solves the PDE, the
/// terminal function is taken from it, and a reference solution is attached.
struct ProblemFile {
    Problem problem;
    bool tamed = false;
    std::optional<ReferenceSolution> reference;
    /// Raw file contents (used for the reproducibility hash).
    std::string text;
};

/// Throws ConfigError naming the offending `section.key` on any problem.
ProblemFile parse_problem(const std::string& text);
ProblemFile load_problem_file(const std::string& path);

}  // namespace sfpe
