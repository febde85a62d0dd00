#include "gqe/harness.hpp"

int main(int argc, char** argv) { return gqe::harness::run_cli(argc, argv); }
