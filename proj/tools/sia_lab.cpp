#include "sia/commands.hpp"

int main(int argc, char** argv) { return sia::run_cli(argc, argv); }
