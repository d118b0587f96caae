#include "gen1s/cli.hpp"

int main(int argc, char** argv) { return gen1s::cli_main(argc, argv); }
