#include <vector>

#include "xrc/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return xrc::run_cli(args);
}
