#include <iostream>
#include <string>
#include <vector>

#include "brwre/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return brwre::cli::run(args, std::cout, std::cerr);
}
