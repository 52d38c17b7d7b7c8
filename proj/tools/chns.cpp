#include "chns/cli.hpp"

int main(int argc, char** argv) { return chns::run_cli(argc, argv); }
