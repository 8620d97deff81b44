#include "recipe2iot/cli.hpp"

int main(int argc, char** argv) { return r2iot::run_cli(argc, argv); }
