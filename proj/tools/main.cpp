// SPDX-License-Identifier: Apache-2.0
#include "csidn/cli.hpp"

int main(int argc, char** argv) { return csidn::run_cli(argc, argv); }
