// Generates one contagion community and one CSTR community of the same size,
// then prints the intensity index and range of every year pair.

#include <cstdio>

#include "ssc/ssc.hpp"

namespace {

void report(const ssc::Community& c, const ssc::Timeline& timeline) {
  const auto grid = ssc::DistanceGrid::up_to(c.r_eff());
  const auto cache = ssc::EdgeProfileCache::for_community(c, grid.max());
  const ssc::EnvelopeConfig env{199, 7};
  std::printf("%s: %zu events, r_eff %.1f m\n", c.id().c_str(), c.size(), c.r_eff());
  for (const auto& cohort : ssc::build_cohorts(c, timeline)) {
    const auto curve = ssc::cross_l_year_pair(c, cohort, grid, &cache);
    if (!curve) continue;
    const auto envs = ssc::build_envelopes(c, cohort, grid, &cache, env);
    const auto m = ssc::compute_pair_metrics(c.id(), *curve, envs->global, c.r_eff());
    std::printf("  %d-%d  CI %6.3f  R %5.0f m  R* %4.2f\n", m.t, m.t_prime, m.ci.value_or(0.0), *m.r_abs, *m.r_rel);
  }
}

}  // namespace

int main() {
  const auto timeline = ssc::Timeline::standard();
  ssc::SynthConfig cfg;
  cfg.polygon = ssc::rectangle(0, 0, 400, 300);
  cfg.counts = ssc::split_counts(300, timeline);
  cfg.seed = 2024;

  cfg.id = "contagion";
  cfg.process = ssc::Process::contagion;
  cfg.contagion_p = 0.9;
  cfg.kernel_range = 20.0;
  report(ssc::gen_contagion(cfg), timeline);

  cfg.id = "random";
  cfg.process = ssc::Process::cstr;
  report(ssc::gen_cstr(cfg), timeline);
}
