// Copyright The itsvd Authors.
// SPDX-License-Identifier: Apache-2.0

#include "itsvd_cli.hpp"

int main(int argc, char **argv) { return itsvd::cli::run_cli(argc, argv); }
