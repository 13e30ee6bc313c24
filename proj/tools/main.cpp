#include "odcast/cli.hpp"

int main(int argc, char** argv) { return odcast::run_cli(argc, argv); }
