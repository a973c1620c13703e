#include <iostream>

#include "brw/cli.hpp"

int main(int argc, char** argv) { return brw::dispatch(argc, argv, std::cout, std::cerr); }
