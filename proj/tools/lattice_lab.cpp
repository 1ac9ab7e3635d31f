#include <iostream>

#include "lwave/cli.hpp"

int main(int argc, char** argv) {
    return lwave::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
