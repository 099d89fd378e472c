#include "visco/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return visco::cli::run(argc, argv, std::cout, std::cerr); }
