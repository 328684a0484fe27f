#include <iostream>
#include <string>
#include <vector>

#include "affistack/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return affistack::run_cli(args, std::cout, std::cerr);
}
