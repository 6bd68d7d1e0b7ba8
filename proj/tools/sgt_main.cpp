#include <iostream>
#include <string>
#include <vector>

#include "sgt/cli/commands.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return sgt::cli::run(args, std::cout, std::cerr);
}
