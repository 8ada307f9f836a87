#include <iostream>

#include "geomopt/cli.hpp"

int main(int argc, char** argv) { return geomopt::run_cli(argc, argv, std::cout, std::cerr); }
