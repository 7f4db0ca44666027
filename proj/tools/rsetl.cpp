// Copyright Contributors to the rsetl Project
// SPDX-License-Identifier: Apache-2.0
//
#include "rsetl/cli.hpp"

int main(int argc, char** argv) { return rsetl::cli::run(argc, argv); }
