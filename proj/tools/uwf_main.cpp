#include <vector>
#include <string>

#include "uwf/cli.hpp"

int main(int argc, char** argv) {
    return uwf::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}
