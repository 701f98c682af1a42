#include "cavityqfi/cli.hpp"

int main(int argc, char** argv) { return cavityqfi::run_cli(argc, argv); }
