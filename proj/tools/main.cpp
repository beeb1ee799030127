#include "ssanova/cli.hpp"

int main(int argc, char** argv) { return ssanova::dispatch(argc, argv); }
