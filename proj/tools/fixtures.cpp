#include <cmath>
#include <cstdint>
#include <random>

#include "app.hpp"
#include "ctfem/grid.hpp"
#include "ctfem/metrics.hpp"

namespace ctfem::app {

namespace {

using nlohmann::json;

// Portable uniform in [lo, hi): mt19937_64 output is fully specified,
// std::uniform_real_distribution is not.
double uniform(std::mt19937_64& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

RealGrid random_grid(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double lo,
                     double hi) {
  RealGrid g(rows, cols);
  for (double& v : g.values()) v = uniform(rng, lo, hi);
  return g;
}

json grid_json(const RealGrid& g) {
  json rows = json::array();
  for (std::size_t r = 0; r < g.rows(); ++r) {
    const auto row = g.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

json make_case(const std::string& name, const RealGrid& power_a, const RealGrid& power_b,
               const RealGrid& mean_q, const RealGrid& var_q) {
  const double is = is_divergence(power_a, power_b);
  const double kl = kl_diag_gauss(mean_q, var_q);
  return json{
      {"name", name},
      {"inputs",
       {{"power_a", grid_json(power_a)},
        {"power_b", grid_json(power_b)},
        {"mean_q", grid_json(mean_q)},
        {"var_q", grid_json(var_q)}}},
      {"expected", {{"is_divergence", is}, {"kl_diag_gauss", kl}, {"elbo_loss", is + kl}}},
  };
}

}  // namespace

json make_loss_fixtures() {
  json cases = json::array();

  RealGrid same(2, 2);
  same(0, 0) = 1.0;
  same(0, 1) = 2.0;
  same(1, 0) = 3.0;
  same(1, 1) = 4.0;
  cases.push_back(make_case("identity", same, same, RealGrid(2, 2, 0.0), RealGrid(2, 2, 1.0)));

  cases.push_back(make_case("scalar", RealGrid(1, 1, 2.0), RealGrid(1, 1, 1.0),
                            RealGrid(1, 1, 1.0), RealGrid(1, 1, 1.0)));

  std::mt19937_64 rng(20240917);
  cases.push_back(make_case("random_small", random_grid(rng, 4, 3, 0.01, 10.0),
                            random_grid(rng, 4, 3, 0.01, 10.0), random_grid(rng, 3, 3, -2.0, 2.0),
                            random_grid(rng, 3, 3, 0.05, 3.0)));
  cases.push_back(make_case("random_medium", random_grid(rng, 16, 8, 1e-4, 100.0),
                            random_grid(rng, 16, 8, 1e-4, 100.0),
                            random_grid(rng, 32, 8, -3.0, 3.0), random_grid(rng, 32, 8, 0.01, 5.0)));

  return json{{"version", 1}, {"cases", cases}};
}

}  // namespace ctfem::app
