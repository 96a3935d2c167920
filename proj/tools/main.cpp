// Copyright 2026 The bvmatch Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

int main(int argc, char** argv) { return bvmatch::cli_main(argc, argv); }
