// Acceptance suite: runs every criterion at its stated tolerance and prints
// one pass/fail line per criterion. Exit code 0 iff all pass.

#include <cstdio>
#include <exception>

#include "wgf/checks.hpp"
#include "wgf/types.hpp"

int main() {
    wgf::tune_allocator();
    try {
        const auto results = wgf::checks::run_suite("all", /*progress=*/true);
        bool all_pass = true;
        std::puts("");
        for (const auto& r : results) {
            std::printf("%s  %-13s %s  [%s]\n", r.pass ? "[PASS]" : "[FAIL]", r.id.c_str(),
                        r.description.c_str(), r.measured.c_str());
            all_pass = all_pass && r.pass;
        }
        std::printf("\nacceptance: %s\n", all_pass ? "ALL CRITERIA PASS" : "FAILURES PRESENT");
        return all_pass ? 0 : 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "acceptance suite aborted: %s\n", e.what());
        return 2;
    }
}
