#include <iostream>

#include "aad/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return aad::run_cli(args, std::cout, std::cerr);
}
