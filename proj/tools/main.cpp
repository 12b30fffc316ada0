#include "unigest/cli.hpp"

int main(int argc, char** argv) { return unigest::run(argc, argv); }
