#include <iostream>

#include "testinj/cli.hpp"

int main(int argc, char** argv) { return testinj::cli::run(argc, argv, std::cout, std::cerr); }
