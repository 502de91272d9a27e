// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <string>
#include <vector>

#include "clipada/cli.hpp"

int main(int argc, char** argv) {
  return clipada::cli::main(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
