#include "ktemper/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return ktemper::cli::run(argc, argv, std::cout, std::cerr); }
