#include "ftle/cli/commands.hpp"

int main(int argc, char** argv) { return ftle::cli::run(argc, argv); }
