#pragma once

#include <string>
#include <vector>

#include "omnivid/config_kv.hpp"
#include "omnivid/dit_core.hpp"

namespace omnivid {

// Model hyperparameters from a flat key-value config; unknown keys are left to
// the other consumers of the same file (datagen, stage plans).
ModelConfig model_config_from(const KvConfig& cfg);

// Full command-line surface. Subcommands: datagen, train, generate, edit,
// eval, inspect. Returns 0 on success, 1 on runtime failure, 2 on usage errors.
int cli_main(std::vector<std::string> args);

}  // namespace omnivid
