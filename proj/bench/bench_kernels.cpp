// Timing harness for the two hot kernels: the blocked contrast evaluation
// (OpenMP vs the sequential reference) and the simulation stepper at several
// thread counts. Prints a small table; no assertions.

#include <chrono>
#include <cstdio>

#include "kips/contrast.hpp"
#include "kips/parallel.hpp"
#include "kips/simulate.hpp"

using namespace kips;
using clock_type = std::chrono::steady_clock;

namespace {

double time_ms(const std::function<void()>& body, int reps) {
    body();  // warm up
    const auto t0 = clock_type::now();
    for (int r = 0; r < reps; ++r) body();
    return std::chrono::duration<double, std::milli>(clock_type::now() - t0).count() / reps;
}

}  // namespace

int main() {
    const auto model = make_kramers_kernel();
    const Theta theta0 = default_theta0("kramers_kernel");
    SimConfig cfg;
    cfg.n_particles = 400;
    cfg.obs_steps = 200;
    cfg.fine_factor = 10;
    cfg.seed = 12345;

    std::printf("simulate N=%d n=%d m=%d\n", cfg.n_particles, cfg.obs_steps, cfg.fine_factor);
    for (int threads : {1, 2, 4}) {
        set_threads(threads);
        const double ms =
            time_ms([&] { (void)simulate_observations(*model, theta0, cfg); }, 3);
        std::printf("  threads=%d  %8.2f ms\n", threads, ms);
    }

    const ObservationSet obs = simulate_observations(*model, theta0, cfg);
    const std::vector<double> theta = theta0.concat();
    std::vector<double> grad(theta.size());

    std::printf("contrast value+gradient, %d terms\n", cfg.n_particles * cfg.obs_steps);
    set_threads(1);
    const double ref_ms = time_ms(
        [&] { (void)reference::contrast(*model, theta, obs, ObsMode::Complete); }, 5);
    std::printf("  sequential reference   %8.2f ms\n", ref_ms);
    for (int threads : {1, 2, 4}) {
        set_threads(threads);
        const double ms = time_ms(
            [&] {
                const PreparedContrast pc(*model, obs, ObsMode::Complete);
                (void)pc.value_grad(theta, grad);
            },
            5);
        std::printf("  blocked, threads=%d     %8.2f ms\n", threads, ms);
    }
    // steady-state evaluation cost without the preparation pass
    const PreparedContrast pc(*model, obs, ObsMode::Complete);
    for (int threads : {1, 2, 4}) {
        set_threads(threads);
        const double ms = time_ms([&] { (void)pc.value_grad(theta, grad); }, 10);
        std::printf("  prepared, threads=%d    %8.2f ms\n", threads, ms);
    }
    return 0;
}
