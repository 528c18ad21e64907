#include <iostream>
#include <string>
#include <vector>

#include "grpo/harness.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return grpo::run_cli(args, std::cout, std::cerr);
}
