#include <iostream>
#include <string>
#include <vector>

#include "trapnet/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return trapnet::run_cli(args, std::cout, std::cerr);
}
