#include "cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return steerlens::cli::run(argc, argv, std::cout, std::cerr);
}
