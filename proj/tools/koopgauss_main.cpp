#include "koopgauss/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
  try {
    return koopgauss::cli_run(argc, argv, std::cout, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << "\n";
    return 2;
  }
}
