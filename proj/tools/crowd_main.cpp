#include "crowd/cli.hpp"

int main(int argc, char** argv) { return crowd::run_cli(argc, argv); }
