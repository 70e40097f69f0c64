#include "sscgan/cli.hpp"

int main(int argc, char** argv) { return sscgan::run_cli(argc, argv); }
