#include <iostream>
#include <string>
#include <vector>

#include "tipping/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return tipping::cli::run_command(args, std::cout, std::cerr);
}
