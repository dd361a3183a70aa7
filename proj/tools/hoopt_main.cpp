#include "hoopt/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return hoopt::run_cli(argc, argv, std::cout, std::cerr); }
