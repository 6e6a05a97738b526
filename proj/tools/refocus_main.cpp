#include "refocus/cli/cli.hpp"

int main(int argc, char** argv) { return refocus::cli::run(argc, argv); }
