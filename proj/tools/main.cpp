#include <iostream>

#include "creator/cli.hpp"

int main(int argc, char** argv) { return creator::run_cli(argc, argv, std::cout, std::cerr); }
