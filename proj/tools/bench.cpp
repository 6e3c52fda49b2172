#include <chrono>
#include <cstdio>
#include <cstdlib>

#include "causalcmp/simulation.hpp"

using namespace causalcmp;

// Compares the serial and OpenMP Monte Carlo drivers on one preset and
// verifies they agree bit for bit.
int main(int argc, char** argv) {
  const int n_sim = argc > 1 ? std::atoi(argv[1]) : 100;
  const int threads = argc > 2 ? std::atoi(argv[2]) : 0;
  const std::uint64_t seed = 20240501;

  MonteCarloOptions o;
  o.threads = threads;
  const ScenarioSpec spec = preset(PresetId::S1);

  const auto t0 = std::chrono::steady_clock::now();
  const PerformanceSummary serial = run_monte_carlo_serial(spec, "S1", n_sim, seed, o);
  const auto t1 = std::chrono::steady_clock::now();
  const PerformanceSummary parallel = run_monte_carlo(spec, "S1", n_sim, seed, o);
  const auto t2 = std::chrono::steady_clock::now();

  const double serial_s = std::chrono::duration<double>(t1 - t0).count();
  const double parallel_s = std::chrono::duration<double>(t2 - t1).count();

  bool identical = serial.methods.size() == parallel.methods.size();
  for (std::size_t j = 0; identical && j < serial.estimates.size(); ++j)
    for (std::size_t r = 0; identical && r < serial.estimates[j].size(); ++r)
      identical = serial.estimates[j][r] == parallel.estimates[j][r];
  for (std::size_t j = 0; identical && j < serial.methods.size(); ++j)
    identical = serial.methods[j].bias == parallel.methods[j].bias &&
                serial.methods[j].coverage == parallel.methods[j].coverage &&
                serial.methods[j].t1e == parallel.methods[j].t1e;

  std::printf("n_sim=%d threads=%d\n", n_sim, threads);
  std::printf("serial   %.3f s  (%.1f runs/s)\n", serial_s, n_sim / serial_s);
  std::printf("parallel %.3f s  (%.1f runs/s, speedup %.2fx)\n", parallel_s,
              n_sim / parallel_s, serial_s / parallel_s);
  std::printf("results identical: %s\n", identical ? "yes" : "NO");
  return identical ? 0 : 1;
}
