#include <pvlc/cli.hpp>

#include <iostream>

int main(int argc, char** argv) { return pvlc::cli::run(argc, argv, std::cout, std::cerr); }
