#include "wattsentinel/service/commands.hpp"

#include <iostream>

int main(int argc, char** argv) { return ws::service::run_cli(argc, argv, std::cout, std::cerr); }
