#include "featforge/cli.hpp"

int main(int argc, char** argv) { return featforge::cli::run(argc, argv); }
