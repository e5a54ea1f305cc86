#include <iostream>

#include "richness/cli.hpp"

int main(int argc, char** argv) { return richness::run_cli(argc, argv, std::cout, std::cerr); }
