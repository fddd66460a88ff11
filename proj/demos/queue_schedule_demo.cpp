// Walks a shrinking negative queue through a fake training run: every
// iteration enqueues a batch of unit-norm keys, the schedule lowers the
// capacity, and old entries fall off the front. Afterwards the demo prints
// the forgetting weights the surviving entries would receive, showing how
// the temperature trades uniform mixing against newest-only attention.

#include <cmath>
#include <cstdio>
#include <vector>

#include "fakeclr/contrastive.hpp"
#include "fakeclr/rng.hpp"
#include "fakeclr/tensor.hpp"

using namespace fakeclr;

namespace {

Tensor unit_keys(std::size_t b, std::size_t p, Rng& rng) {
    Tensor keys({b, p});
    for (std::size_t i = 0; i < b; ++i) {
        double sq = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            keys.at(i, j) = rng.normal();
            sq += keys.at(i, j) * keys.at(i, j);
        }
        const double inv = 1.0 / std::sqrt(sq);
        for (std::size_t j = 0; j < p; ++j) keys.at(i, j) *= inv;
    }
    return keys;
}

}  // namespace

int main() {
    QueueSchedule schedule;
    schedule.initial_capacity = 256;
    schedule.decay_rate = 0.5;
    schedule.min_capacity = 32;

    NegativeQueue queue(schedule);
    Rng rng(7);

    const long long iterations = 600;
    const std::size_t batch = 4;

    std::printf("queue schedule: N0=%zu decay=%.2f/iter floor=%zu, %zu keys pushed per iteration\n\n",
                schedule.initial_capacity, schedule.decay_rate, schedule.min_capacity, batch);
    std::printf("%10s %8s %6s %12s %12s\n", "iteration", "target", "size", "oldest", "newest");

    for (long long t = 0; t < iterations; ++t) {
        queue.push(unit_keys(batch, 8, rng), t);
        if (t % 60 == 0 || t == iterations - 1) {
            const auto labels = queue.labels();
            std::printf("%10lld %8zu %6zu %12lld %12lld\n", t,
                        queue_target_size(t, schedule), queue.size(),
                        labels.front(), labels.back());
        }
    }

    std::printf("\nforgetting weights over the %zu surviving entries (oldest..newest):\n", queue.size());
    for (double tau : {1000.0, 0.05, 0.01}) {
        const auto m = forgetting_factors(queue.labels(), tau);
        std::printf("  tau_m=%-7g first=%.3e mid=%.3e last=%.3e\n",
                    tau, m.front(), m[m.size() / 2], m.back());
    }
    std::printf("\nlarge tau_m spreads weight evenly; small tau_m concentrates it on the newest keys.\n");
    return 0;
}
