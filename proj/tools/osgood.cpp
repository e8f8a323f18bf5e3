#include <iostream>
#include <string>
#include <vector>

#include "osgood/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return osgood::cli::run_command(args, std::cout, std::cerr);
}
