#include <iostream>

#include "oiparts/cli.h"

int main(int argc, char** argv) {
  return oiparts::RunCli(argc, argv, std::cout, std::cerr);
}
