#include "earcount/cli.hpp"

int main(int argc, char** argv) { return earcount::run_cli(argc, argv); }
