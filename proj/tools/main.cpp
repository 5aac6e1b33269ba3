#include <iostream>

#include "simplex_uq/cli.hpp"

int main(int argc, char** argv) { return simplex_uq::run_cli(argc, argv, std::cout, std::cerr); }
