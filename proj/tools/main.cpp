#include <iostream>
#include <string>
#include <vector>

#include "trialdesign/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return trialdesign::main_entry(args, std::cout, std::cerr);
}
