#include <iostream>

#include "stateval/cli.hpp"

int main(int argc, char** argv) { return stateval::cli::run(argc, argv, std::cout, std::cerr); }
