#include <iostream>
#include <string>
#include <vector>

#include "shiftkrr/cli.h"

int main(int argc, char **argv) {
  std::vector<std::string> args(argv, argv + argc);
  auto parsed = shiftkrr::cli::parse_args(args, std::cout, std::cerr);
  if (!parsed.config) {
    return parsed.exit_code;
  }
  return shiftkrr::cli::run(*parsed.config, std::cout, std::cerr);
}
