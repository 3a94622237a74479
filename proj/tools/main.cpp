#include "atomsim/cli.hpp"

int main(int argc, char** argv) { return atomsim::cli::dispatch(argc, argv); }
