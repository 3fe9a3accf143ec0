#include <iostream>

#include "obcbf/acceptance.hpp"

int main() {
  const auto results = obcbf::run_acceptance(
      [](const obcbf::CriterionResult& r) { std::cout << obcbf::format_result(r) << std::endl; });
  int failed = 0;
  for (const auto& r : results) failed += !r.pass;
  std::cout << results.size() - failed << "/" << results.size() << " acceptance criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
