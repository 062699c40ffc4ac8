#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "wgf/types.hpp"

int main(int argc, char** argv) {
    wgf::tune_allocator();
    return doctest::Context(argc, argv).run();
}
