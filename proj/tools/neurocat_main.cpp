#include <iostream>

#include "neurocat/cli.hpp"

int main(int argc, char** argv) { return neurocat::run_cli(argc, argv, std::cout, std::cerr); }
