#pragma once

#include <string>

#include "hj/characteristics.hpp"
#include "hj/harness.hpp"
#include "hj/scheme.hpp"

namespace hj {

/// Parses a JSON problem description (see README for the schema) into a
/// ProblemConfig. Raises ConfigError on malformed JSON, unknown fields
/// with no default, or values of the wrong type.
ProblemConfig parse_config(const std::string& text);

/// Reads the file and parses it. Raises ConfigError when the file cannot
/// be opened.
ProblemConfig load_config(const std::string& path);

/// Writes every stored level as CSV rows `k,m1..md,v,dv1..dvd`. Solution
/// nodes carry the value and leave the gradient columns empty; gradient
/// nodes do the reverse, and only where the centered difference has both
/// neighbors in storage. A `#`-prefixed header records dx, dt, lambda,
/// the dimension, and the model name.
void write_layers_csv(const std::string& path, const SolveResult& result);

/// Writes a small JSON summary of a solve: the configuration echoes, the
/// grid, the observed gradient bound, and the update residual.
void write_solve_metadata(const std::string& path, const ProblemConfig& cfg,
                          const SolveResult& result);

/// Writes an extracted characteristic as CSV rows
/// `path_id,level,t,x1..xd,eta1..etad,density`. The averaged path gets
/// id -1 with empty eta and density 1; ensemble members follow with
/// their lattice positions, expected positions, and path densities.
void write_walk_csv(const std::string& path,
                    const CharacteristicExtraction& extraction,
                    const Lattice& lat);

void write_convergence_csv(const std::string& path,
                           const ConvergenceReport& report);

void write_convergence_json(const std::string& path,
                            const ConvergenceReport& report);

} // namespace hj
