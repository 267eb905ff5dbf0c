#include <iostream>

#include "mdfem/cli.hpp"

int main(int argc, char** argv) { return mdfem::run_cli(argc, argv, std::cout, std::cerr); }
