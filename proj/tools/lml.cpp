#include "lml/cli.hpp"

int main(int argc, char** argv) { return lml::run_cli(argc, argv); }
