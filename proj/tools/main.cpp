#include "omnivid/cli.hpp"

int main(int argc, char** argv) {
    return omnivid::cli_main(std::vector<std::string>(argv + 1, argv + argc));
}
