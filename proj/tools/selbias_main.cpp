#include <iostream>
#include <string>
#include <vector>

#include "selbias/cli.hpp"

int main(int argc, char** argv) {
    return selbias::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout,
                             std::cerr);
}
