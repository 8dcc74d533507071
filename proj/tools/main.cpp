#include <iostream>
#include <string>
#include <vector>

#include "grbm/cli.hpp"

int main(int argc, char** argv) {
    const std::vector<std::string> args(argv, argv + argc);
    return grbm::cli::run(args, std::cout, std::cerr);
}
