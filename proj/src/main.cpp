#include "slipinv/io.hpp"

int main(int argc, char** argv) { return slipinv::run_cli(argc, argv); }
