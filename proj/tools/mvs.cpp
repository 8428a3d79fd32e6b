#include "mvs/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return mvs::cli::run(argc, argv, std::cout, std::cerr); }
