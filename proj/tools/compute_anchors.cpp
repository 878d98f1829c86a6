// Monte-Carlo estimate of the random/expert return anchors baked into envs.hpp.
#include "prc/prc.hpp"

#include <iostream>

int main(int argc, char** argv) {
  const int episodes = argc > 1 ? std::atoi(argv[1]) : 10000;
  const std::uint64_t seed = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 2024;
  for (prc::EnvId id : {prc::EnvId::PointReach, prc::EnvId::NarrowPath, prc::EnvId::GridWorld5x5}) {
    const prc::EnvSpec spec = prc::make_env_spec(id);
    prc::UniformRandomPolicy random(spec);
    prc::ExpertPolicy expert(spec);
    const auto r = prc::evaluate_policy(spec, random, nullptr, episodes, seed);
    const auto e = prc::evaluate_policy(spec, expert, nullptr, episodes, seed);
    std::cout << prc::to_string(id) << " random " << prc::format_double(r.true_mean) << " (se "
              << r.true_std / std::sqrt(episodes) << ") expert " << prc::format_double(e.true_mean) << " (se "
              << e.true_std / std::sqrt(episodes) << ")\n";
  }
}
