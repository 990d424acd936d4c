#include <iostream>
#include <string>
#include <vector>

#include "kfp/cli_runner.hpp"

int main(int argc, char** argv) {
  return kfp::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
