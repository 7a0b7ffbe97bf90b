#include <iostream>

#include "kls/cli.hpp"

int main(int argc, char** argv) { return kls::cli::run_cli(argc, argv, std::cout, std::cerr); }
