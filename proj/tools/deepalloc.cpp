#include "deepalloc/cli/commands.hpp"

int main(int argc, char** argv) { return deepalloc::cli::run(argc, argv); }
