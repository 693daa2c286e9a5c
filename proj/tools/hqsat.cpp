#include "hqsat/cli.hpp"

int main(int argc, char** argv) { return hqsat::run_cli(argc, argv); }
