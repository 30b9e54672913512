#include <iostream>

#include "pvrnet/cli.hpp"

int main(int argc, char** argv) { return pvr::run_cli(argc, argv, std::cout, std::cerr); }
