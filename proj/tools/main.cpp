#include "dgpmp/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
  return dgpmp::cli::run(argc, argv, std::cout, std::cerr);
}
