#include <iostream>

#include "latcap/cli.hpp"

int main(int argc, char** argv) { return latcap::run_cli(argc, argv, std::cout, std::cerr); }
