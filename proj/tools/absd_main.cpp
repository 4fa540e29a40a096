#include "absd/cli.hpp"

int main(int argc, char** argv) { return absd::run_cli(argc, argv); }
