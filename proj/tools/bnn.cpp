#include <iostream>

#include "bnn/cli.hpp"

int main(int argc, char** argv) { return bnn::cli::run_cli(argc, argv, std::cout, std::cerr); }
