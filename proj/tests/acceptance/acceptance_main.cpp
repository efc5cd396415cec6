#include <CLI11.hpp>

#include <chrono>
#include <exception>
#include <functional>
#include <iostream>
#include <set>

#include <tmask/harness.hpp>

#include "acceptance.hpp"

using namespace tmask::acceptance;

int main(int argc, char** argv) {
  tmask::retain_heap_memory();
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  std::string config_dir = TMASK_CONFIG_DIR;
  app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',');
  app.add_option("--configs", config_dir, "Directory holding default.json and ablation.json");
  CLI11_PARSE(app, argc, argv);

  const std::filesystem::path dir(config_dir);
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"fused swap equals composition", swap_matches_composition},
      {"fused swap cost independent of lambda", swap_complexity},
      {"instancefcn decode equals direct construction", instancefcn_matches_direct},
      {"gradients match finite differences", gradient_suite},
      {"transform algebra", transform_algebra},
      {"assignment equals brute-force oracle", assignment_matches_oracle},
      {"loss spot values", loss_spot_values},
      {"ablation directions", [&] { return ablation_directions(dir / "ablation.json"); }},
      {"end-to-end training", [&] { return end_to_end(dir / "default.json"); }},
      {"nms and calibration", nms_and_calibration},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.contains(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome r;
    try {
      r = criteria[i].second();
    } catch (const std::exception& e) {
      r = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "criterion " << id << ": " << (r.pass ? "PASS" : "FAIL") << "  " << criteria[i].first
              << "  [" << r.detail << "] (" << secs << " s)" << std::endl;
    failed += !r.pass;
  }
  return failed == 0 ? 0 : 1;
}
