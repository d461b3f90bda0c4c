#include <iostream>

#include "mbym2/cli/commands.hpp"

int main(int argc, char** argv) { return mbym2::cli::run(argc, argv, std::cout, std::cerr); }
