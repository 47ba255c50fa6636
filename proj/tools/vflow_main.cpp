#include <iostream>

#include "vflow/cli.hpp"

int main(int argc, char** argv) { return vflow::cli_main(argc, argv, std::cin, std::cout, std::cerr); }
