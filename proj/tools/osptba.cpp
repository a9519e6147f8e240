#include <iostream>

#include "osptba/cli.hpp"

int main(int argc, char** argv) { return osptba::cli::run(argc, argv, std::cout, std::cerr); }
