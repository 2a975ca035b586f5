#include <iostream>

#include "drivecombo/cli.hpp"

int main(int argc, char** argv) {
  return drivecombo::run_cli({argv + 1, argv + argc}, std::cout, std::cerr);
}
