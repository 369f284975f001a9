#include <iostream>
#include <string>
#include <vector>

#include "cvxrobust/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  return cvxrobust::cli::run(args, std::cout, std::cerr);
}
