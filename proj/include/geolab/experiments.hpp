// Named end-to-end experiments: parse a config, run, write tables, plots and
// the manifest. The CLI maps these onto its exit codes.
#pragma once

#include <string>

#include "geolab/io.hpp"

namespace geolab {

struct ExperimentResult {
    bool checks_passed = true;  // self-test verdict (exit code 4 when false)
    std::string summary;
};

/// experiment must be one of: geometry-selftest, floquet-audit,
/// boundary-map, complete-system, integrable-baseline, homoclinic-hunt.
ExperimentResult run_experiment(const Config& cfg);

/// The allowed config keys (schema used for unknown-key rejection).
const std::map<std::string, std::vector<std::string>>& config_schema();

}  // namespace geolab
