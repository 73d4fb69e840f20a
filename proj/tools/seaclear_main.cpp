#include <iostream>
#include <string>
#include <vector>

#include "seaclear/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return seaclear::run_cli(args, std::cout, std::cerr);
}
