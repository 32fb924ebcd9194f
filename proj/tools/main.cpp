#include <string>
#include <vector>

#include "varest/cli.hpp"

int main(int argc, char** argv) { return varest::run_cli(std::vector<std::string>(argv + 1, argv + argc)); }
