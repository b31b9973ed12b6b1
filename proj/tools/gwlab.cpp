// SPDX-License-Identifier: Apache-2.0
#include <iostream>

#include "gwlab/cli.hpp"

int main(int argc, char** argv) { return gwlab::run_cli(argc, argv, std::cout, std::cerr); }
