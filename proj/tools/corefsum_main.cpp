#include <iostream>
#include <string>
#include <vector>

#include "corefsum/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    const corefsum::cli::CommandResult result = corefsum::cli::run(args);
    if (!result.summary.empty()) std::cout << result.summary << std::endl;
    return result.exit_code;
}
