#include <iostream>

#include "crstd/cli.hpp"

int main(int argc, char** argv) { return crstd::run_cli(argc, argv, std::cout, std::cerr); }
