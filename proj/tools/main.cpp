#include <vector>

#include "specref/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return specref::run_cli(args);
}
