#include <iostream>

#include "horo/cli.hpp"

int main(int argc, char** argv) { return horo::run_command(argc, argv, std::cout, std::cerr); }
