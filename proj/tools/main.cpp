#include "priorsplat/cli.hpp"

int main(int argc, char** argv) { return priorsplat::run_cli(argc, argv); }
