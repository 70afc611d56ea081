#include <iostream>

#include "dirnormal/cli.hpp"

int main(int argc, char** argv) { return dirnormal::run_cli(argc, argv, std::cout, std::cerr); }
