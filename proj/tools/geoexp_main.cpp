#include <iostream>

#include "geoexp/cli.hpp"

int main(int argc, char** argv) { return geoexp::run_cli(argc, argv, std::cout, std::cerr); }
