#pragma once

#include "hbes/program.hpp"

#include <iosfwd>
#include <string>

namespace hbes {

/// Bounded-variable two-phase primal simplex on a dense tableau.
/// Rejects programs with binaries or quadratic terms.
Solution solve_lp(const StandardFormProgram& program, const SolveOptions& options = {});

/// Primal-dual interior point (Mehrotra predictor-corrector) for convex
/// programs with a diagonal quadratic term. Linear systems are solved through
/// sparse normal equations, so this path also handles year-long dispatch LPs.
/// Binaries are ignored (treated as continuous in [lb, ub]).
Solution solve_qp(const StandardFormProgram& program, const SolveOptions& options = {});

/// Best-bound branch and bound over the binaries using solve_lp at every node.
/// Branches on the most fractional binary (lowest index on ties); nodes with
/// equal bound are processed FIFO.
Solution solve_milp(const StandardFormProgram& program, const SolveOptions& options = {});

/// Fixed-format MPS text. Unnamed rows/columns get deterministic names.
std::string export_mps(const StandardFormProgram& program, const std::string& name = "HBES");

/// Parses the subset of MPS written by export_mps (fixed or free spacing).
StandardFormProgram import_mps(const std::string& text);

/// `name,value` CSV of the primal solution.
void write_solution_csv(std::ostream& os, const StandardFormProgram& program, const Solution& sol);

}  // namespace hbes
