// Runs each query strategy once on the synthetic ring and prints the
// learning curve every ten labels.

#include <iomanip>
#include <iostream>

#include "alcurve/alcurve.hpp"

int main() {
    using namespace alcurve;
    const SampleGraph data = generate_synthetic(SyntheticConfig{});
    ExperimentConfig cfg;
    cfg.trials = 3;
    cfg.budget = 60;
    const AggregateResult r = run_experiment(cfg, data);

    std::cout << "full training set: " << std::fixed << std::setprecision(3) << r.full_baseline << "\n\n";
    std::cout << "labels";
    for (const auto& s : r.strategies) std::cout << std::setw(8) << to_string(s.strategy);
    std::cout << '\n';
    for (std::size_t n = 10; n <= cfg.budget; n += 10) {
        std::cout << std::setw(6) << n;
        for (const auto& s : r.strategies) {
            const auto m = s.mean_at(n);
            if (m) {
                std::cout << std::setw(8) << *m;
            } else {
                std::cout << std::setw(8) << "-";
            }
        }
        std::cout << '\n';
    }
}
