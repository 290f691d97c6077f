#include <iostream>

#include "tfln/cli.hpp"

int main(int argc, char** argv) {
  return tfln::cli_main(argc, argv, std::cout, std::cerr);
}
