#include "graindeck/cli.hpp"

int main(int argc, char** argv) { return graindeck::cli::run(argc, argv); }
