#include <iostream>
#include <string>
#include <vector>

#include "ivcr/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return ivcr::run_cli(args, std::cout, std::cerr);
}
