#include "sdecay/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return sdecay::cli::dispatch(argc, argv, std::cout, std::cerr); }
