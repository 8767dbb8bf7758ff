#include <iostream>

#include "sscl/cli.hpp"

int main(int argc, char** argv) {
  return sscl::dispatch(argc, argv, std::cout, std::cerr);
}
