#include "kips/observe.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>

#include "kips/csv.hpp"
#include "kips/errors.hpp"
#include "kips/simulate.hpp"

namespace kips {

std::string to_string(ObsMode m) { return m == ObsMode::Complete ? "C" : "P"; }

ObsMode obs_mode_from_string(const std::string& s) {
    if (s == "C" || s == "complete") return ObsMode::Complete;
    if (s == "P" || s == "partial") return ObsMode::Partial;
    throw ConfigError("unknown observation mode: " + s);
}

void ObservationSet::validate() const {
    if (y.cols() < 2 || y.rows() < 1) throw std::invalid_argument("ObservationSet: empty");
    if (times.size() != static_cast<std::size_t>(y.cols()))
        throw std::invalid_argument("ObservationSet: times/grid mismatch");
    if (mode == ObsMode::Complete) {
        if (!x || x->rows() != y.rows() || x->cols() != y.cols())
            throw std::invalid_argument("ObservationSet: complete mode needs matching x");
    } else if (x) {
        throw std::invalid_argument("ObservationSet: partial mode must not carry x");
    }
}

ObservationSet make_partial(ObservationSet obs) {
    obs.x.reset();
    obs.mode = ObsMode::Partial;
    return obs;
}

SurrogateSet surrogate(const ObservationSet& obs) {
    const int n = obs.n_intervals();
    if (n < 2) throw std::invalid_argument("surrogate: need at least 2 observation intervals");
    const int N = obs.n_particles();
    SurrogateSet out;
    out.delta = obs.delta;
    out.x_tilde = Array2D(N, n);
    out.measures.reserve(static_cast<std::size_t>(n));
    std::vector<Point2> slice(static_cast<std::size_t>(N));
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < N; ++i) {
            const double xt = (obs.y(i, j + 1) - obs.y(i, j)) / obs.delta;
            out.x_tilde(i, j) = xt;
            slice[static_cast<std::size_t>(i)] = {obs.y(i, j), xt};
        }
        out.measures.emplace_back(slice);
    }
    return out;
}

GaussianWeights gaussian_weights(const TrajectoryGrid& grid) {
    const SimConfig& cfg = grid.cfg;
    if (cfg.fine_factor < 2)
        throw std::invalid_argument("gaussian_weights: fine_factor >= 2 required");
    if (grid.db.cols() != static_cast<int>(cfg.fine_steps()))
        throw std::invalid_argument("gaussian_weights: grid does not retain dB");
    const int N = cfg.n_particles;
    const int n = cfg.obs_steps;
    const int m = cfg.fine_factor;
    const double delta = cfg.obs_delta();
    const double scale = 1.0 / (delta * std::sqrt(delta));  // Delta^{-3/2}
    const double dt = cfg.fine_delta();

    GaussianWeights w;
    w.xi = Array2D(N, n);
    w.xi_tilde = Array2D(N, n);
    w.u = Array2D(N, n - 1);
    // midpoint weights: the increment over [t_k, t_k + dt) carries the weight
    // evaluated at t_k + dt/2, keeping the second moments at their continuous
    // values up to O(1/m^2)
    std::vector<double> w_left(static_cast<std::size_t>(m)), w_right(static_cast<std::size_t>(m));
    for (int l = 0; l < m; ++l) {
        w_right[static_cast<std::size_t>(l)] = (static_cast<double>(m - l) - 0.5) * dt;  // (j+1)D - s
        w_left[static_cast<std::size_t>(l)] = (static_cast<double>(l) + 0.5) * dt;       // s - jD
    }
    for (int i = 0; i < N; ++i) {
        for (int j = 0; j < n; ++j) {
            double sxi = 0.0, sxt = 0.0;
            const int base = j * m;
            for (int l = 0; l < m; ++l) {
                const double db = grid.db(i, base + l);
                sxi += w_right[static_cast<std::size_t>(l)] * db;
                sxt += w_left[static_cast<std::size_t>(l)] * db;
            }
            w.xi(i, j) = scale * sxi;
            w.xi_tilde(i, j) = scale * sxt;
        }
        for (int j = 0; j + 1 < n; ++j) w.u(i, j) = w.xi_tilde(i, j) + w.xi(i, j + 1);
    }
    return w;
}

void write_observation_csv(const ObservationSet& obs, const std::string& path) {
    obs.validate();
    csv::Writer w(path);
    const bool complete = obs.mode == ObsMode::Complete;
    w.header(complete ? std::vector<std::string>{"t", "particle", "y", "x"}
                      : std::vector<std::string>{"t", "particle", "y"});
    for (int j = 0; j < obs.y.cols(); ++j) {
        for (int i = 0; i < obs.n_particles(); ++i) {
            std::vector<std::string> row = {csv::fmt(obs.times[static_cast<std::size_t>(j)]),
                                            csv::fmt(i), csv::fmt(obs.y(i, j))};
            if (complete) row.push_back(csv::fmt((*obs.x)(i, j)));
            w.row(row);
        }
    }
}

ObservationSet read_observation_csv(const std::string& path) {
    const auto rows = csv::read(path);
    if (rows.size() < 2) throw std::runtime_error("observation csv too short: " + path);
    const auto& hdr = rows[0];
    const bool complete = hdr.size() == 4;
    if (!(hdr.size() == 3 || complete) || hdr[0] != "t" || hdr[1] != "particle" || hdr[2] != "y" ||
        (complete && hdr[3] != "x"))
        throw std::runtime_error("unexpected observation csv header in " + path);

    // infer N from the run of rows sharing the first time stamp
    const std::string& t0 = rows[1][0];
    int N = 0;
    while (1 + N < static_cast<int>(rows.size()) && rows[static_cast<std::size_t>(1 + N)][0] == t0) ++N;
    const long records = static_cast<long>(rows.size()) - 1;
    if (N < 1 || records % N != 0) throw std::runtime_error("ragged observation csv: " + path);
    const int cols = static_cast<int>(records / N);

    ObservationSet obs;
    obs.mode = complete ? ObsMode::Complete : ObsMode::Partial;
    obs.times.resize(static_cast<std::size_t>(cols));
    obs.y = Array2D(N, cols);
    if (complete) obs.x = Array2D(N, cols);
    for (int j = 0; j < cols; ++j) {
        for (int i = 0; i < N; ++i) {
            const auto& r = rows[static_cast<std::size_t>(1 + j * N + i)];
            obs.times[static_cast<std::size_t>(j)] = std::strtod(r[0].c_str(), nullptr);
            obs.y(i, j) = std::strtod(r[2].c_str(), nullptr);
            if (complete) (*obs.x)(i, j) = std::strtod(r[3].c_str(), nullptr);
        }
    }
    obs.delta = cols > 1 ? obs.times[1] - obs.times[0] : 0.0;
    obs.validate();
    return obs;
}

}  // namespace kips
