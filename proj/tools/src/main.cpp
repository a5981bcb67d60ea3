#include "tiltwise/cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
  return tiltwise::cli::run(argc, argv, std::cout, std::cerr);
}
