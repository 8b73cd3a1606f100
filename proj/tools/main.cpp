#include <iostream>

#include "cli.hpp"
#include "ris_sense/parallel.hpp"

int main(int argc, char** argv) {
    ris::configure_allocator();
    return ris::cli::run_cli(argc, argv, std::cout, std::cerr);
}
