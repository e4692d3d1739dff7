#include <iostream>

#include "matrixpower/cli.hpp"

int main(int argc, char** argv) { return matrixpower::run_cli(argc, argv, std::cout, std::cerr); }
