#include <iostream>

#include "xqr/cli.hpp"

int main(int argc, char** argv) { return xqr::run_cli(argc, argv, std::cout, std::cerr); }
