#include "hbes/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return hbes::run_cli(args, std::cout, std::cerr);
}
