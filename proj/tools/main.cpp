#include "manipulant/cli.hpp"

int main(int argc, char** argv) { return manipulant::run_cli(argc, argv); }
