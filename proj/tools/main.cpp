#include "xplain/cli.hpp"

int main(int argc, char** argv) { return xplain::run_cli(argc, argv); }
