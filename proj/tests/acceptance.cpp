// Acceptance suite runner: one line per criterion, nonzero exit on failure.
#include <cstdio>
#include <cstring>

#include "coex/verify.hpp"

int main(int argc, char** argv) {
  coex::verify::SuiteOptions opts;
  for (int i = 1; i < argc; ++i)
    if (std::strcmp(argv[i], "--quick") == 0) opts.quick = true;
  opts.on_result = [](const coex::verify::CriterionResult& r) {
    std::printf("[%s] %2d %-55s (%.1fs) %s\n", r.pass ? "PASS" : "FAIL", r.id, r.name.c_str(),
                r.seconds, r.detail.c_str());
    std::fflush(stdout);
  };
  auto results = coex::verify::run_acceptance(opts);
  int failed = 0;
  for (auto& r : results) failed += r.pass ? 0 : 1;
  std::printf("%d/%zu criteria passed\n", (int)results.size() - failed, results.size());
  return failed == 0 ? 0 : 1;
}
