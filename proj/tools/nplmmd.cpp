#include <iostream>

#include "nplmmd/cli.hpp"

int main(int argc, char** argv) { return nplmmd::cli::run(argc, argv, std::cout, std::cerr); }
