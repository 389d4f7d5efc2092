#pragma once

#include "clvshadow/config.hpp"
#include "clvshadow/sensitivity.hpp"
#include "clvshadow/verify.hpp"

namespace clvshadow {

/// Command bodies behind the CLI subcommands. Each runs its pipeline from
/// the config, writes report files under cfg.out_dir, and returns the
/// process exit code. Failures are thrown as Error subclasses; the CLI entry
/// point turns them into single-line messages and exit codes.
int cmd_clv(const ExperimentConfig& cfg);
int cmd_shadow(const ExperimentConfig& cfg);
int cmd_sens(const ExperimentConfig& cfg);
int cmd_verify(const ExperimentConfig& cfg);
int cmd_fd(const ExperimentConfig& cfg);

/// Route a subcommand name to its body; InvalidConfigError for unknown names.
int dispatch(const std::string& command, const ExperimentConfig& cfg);

} // namespace clvshadow
