// Copyright 2026 The bvmatch Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef BVMATCH_TOOLS_CLI_HPP_
#define BVMATCH_TOOLS_CLI_HPP_

namespace bvmatch {

/// Runs one subcommand. Returns 0 on success, 1 on a usage error and 2 when
/// the command itself fails.
int cli_main(int argc, const char* const* argv);

}  // namespace bvmatch

#endif  // BVMATCH_TOOLS_CLI_HPP_
