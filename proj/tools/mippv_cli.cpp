#include <string>
#include <vector>

#include "mippv/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return mippv::cli_dispatch(args);
}
