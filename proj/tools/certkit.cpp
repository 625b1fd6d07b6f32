#include <iostream>

#include "certkit/cli.hpp"

int main(int argc, char** argv) { return certkit::run_cli(argc, argv, std::cout, std::cerr); }
