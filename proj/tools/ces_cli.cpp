// Command line front end. Subcommands are filled in alongside the library
// modules; see README for the exit-code contract.

#include <iostream>

int main(int argc, char** argv) {
    (void)argc;
    (void)argv;
    std::cerr << "ces: not yet implemented\n";
    return 2;
}
