#include <iostream>
#include <string>
#include <vector>

#include "sfpe/cli_runner.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv, argv + argc);
    return sfpe::run_cli(args, std::cout, std::cerr);
}
