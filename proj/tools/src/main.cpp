#include <iostream>
#include <string>
#include <vector>

#include "warpsol_cli/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return warpsol::cli::run(args, std::cout, std::cerr);
}
