#include "boxseg/cli.hpp"

int main(int argc, char** argv) { return boxseg::run_cli(argc, argv); }
