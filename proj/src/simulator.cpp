#include "levyband/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <boost/random/exponential_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <thread>

namespace levyband {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

std::uint64_t CounterRng::path_key(std::uint64_t seed, std::uint64_t path) {
    return mix64(mix64(seed) ^ (path * kGolden + 0x632be59bd9b4e019ULL));
}

CounterRng::result_type CounterRng::operator()() { return mix64(key_ + (++counter_) * kGolden); }

double CounterRng::uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

double CounterRng::exponential(double rate) { return boost::random::exponential_distribution<double>(rate)(*this); }

double CounterRng::normal() { return boost::random::normal_distribution<double>(0.0, 1.0)(*this); }

int worker_count(const SimConfig& cfg, std::int64_t jobs) {
    int n = cfg.threads > 0 ? cfg.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (const char* env = std::getenv("LEVYBAND_THREADS")) {
        const int cap = std::atoi(env);
        if (cap > 0) n = std::min(n, cap);
    }
    return static_cast<int>(std::max<std::int64_t>(1, std::min<std::int64_t>(n, jobs)));
}

double pairwise_sum(const double* data, std::size_t n) {
    if (n <= 16) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += data[i];
        return acc;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(data, half) + pairwise_sum(data + half, n - half);
}

namespace {

template <class Job>
void parallel_for(std::int64_t n, const SimConfig& cfg, Job&& job) {
    const int workers = worker_count(cfg, n);
    if (workers == 1) {
        for (std::int64_t i = 0; i < n; ++i) job(i);
        return;
    }
    constexpr std::int64_t kChunk = 64;
    std::atomic<std::int64_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::int64_t start = next.fetch_add(kChunk);
            if (start >= n) return;
            const std::int64_t stop = std::min(n, start + kChunk);
            for (std::int64_t i = start; i < stop; ++i) job(i);
        }
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
}

struct MeanSe {
    double mean;
    double std_error;
};

MeanSe mean_and_stderr(const std::vector<double>& v) {
    const std::size_t n = v.size();
    const double mean = pairwise_sum(v.data(), n) / static_cast<double>(n);
    if (n < 2) return {mean, 0.0};
    // Deviations from the first sample keep identical samples at exactly zero spread.
    std::vector<double> d(n), sq(n);
    for (std::size_t i = 0; i < n; ++i) {
        d[i] = v[i] - v[0];
        sq[i] = d[i] * d[i];
    }
    const double sd = pairwise_sum(d.data(), n);
    const double nn = static_cast<double>(n);
    const double var = std::max(0.0, (pairwise_sum(sq.data(), n) - sd * sd / nn) / (nn - 1.0));
    return {mean, std::sqrt(var / static_cast<double>(n))};
}

// int_0^h e^{-lambda s} s^k ds for k = 0, 1, 2.
std::array<double, 3> discount_moments(double lambda, double h) {
    const double z = lambda * h;
    if (z < 0.1) {
        std::array<double, 3> m{};
        for (int k = 0; k < 3; ++k) {
            double term = std::pow(h, k + 1);  // (-lambda)^j h^{k+j+1} / j!
            double acc = 0.0;
            for (int j = 0; j < 12; ++j) {
                acc += term / (k + j + 1);
                term *= -z / (j + 1);
            }
            m[static_cast<std::size_t>(k)] = acc;
        }
        return m;
    }
    const double e = std::exp(-z);
    const double l2 = lambda * lambda;
    return {-std::expm1(-z) / lambda, (1.0 - e * (1.0 + z)) / l2, (2.0 - e * (2.0 + 2.0 * z + z * z)) / (l2 * lambda)};
}

// Walks one controlled path and reports to an observer:
//   obs.segment(t, h, x0, x1)          path moves from x0 to x1 over [t, t+h]
//   obs.intervene(t, pre, post) -> bool  reset; returning false stops the path
// Returns the state at the stopping time.
class PathWalker {
public:
    PathWalker(const ModelParams& m, const BandPolicy& p, const SimConfig& cfg, bool controlled)
        : m_(m), p_(p), cfg_(cfg), controlled_(controlled) {
        use_grid_ = m_.sigma > 0.0 || cfg_.record_grid;
        sqrt_dt_ = std::sqrt(cfg_.dt);
        if (m_.sigma > 0.0) bridge_scale_dt_ = 2.0 / (m_.sigma * m_.sigma * cfg_.dt);
    }

    template <class Obs>
    double run(double x, double t_end, CounterRng& rng, Obs& obs, double* stop_time = nullptr) const {
        double t = 0.0;
        auto finish = [&](double state) {
            if (stop_time) *stop_time = t;
            return state;
        };
        if (x <= p_.a) {
            if (!obs.intervene(t, x, p_.alpha)) return finish(x);
            x = p_.alpha;
        } else if (x >= p_.b) {
            if (!obs.intervene(t, x, p_.beta)) return finish(x);
            x = p_.beta;
        }
        const double inf = std::numeric_limits<double>::infinity();
        double next_jump = m_.jump_rate > 0.0 ? rng.exponential(m_.jump_rate) : inf;

        while (t < t_end) {
            const bool jump_due = next_jump <= t_end;
            double h = (jump_due ? next_jump : t_end) - t;
            bool at_jump = jump_due;
            if (use_grid_ && h > cfg_.dt) {
                h = cfg_.dt;
                at_jump = false;
            }
            const double sd = h == cfg_.dt ? sqrt_dt_ : std::sqrt(h);
            const double x1 = x + m_.mu * h + (m_.sigma > 0.0 ? m_.sigma * sd * rng.normal() : 0.0);

            // Continuous crossing of a or b within the step.
            double frac = -1.0;
            double barrier = 0.0;
            if (x1 <= p_.a) {
                frac = (x - p_.a) / (x - x1);
                barrier = p_.a;
            } else if (x1 >= p_.b) {
                frac = (p_.b - x) / (x1 - x);
                barrier = p_.b;
            } else if (cfg_.bridge_correction && m_.sigma > 0.0) {
                const double scale = h == cfg_.dt ? bridge_scale_dt_ : 2.0 / (m_.sigma * m_.sigma * h);
                const double el = scale * (x - p_.a) * (x1 - p_.a);
                const double eu = scale * (p_.b - x) * (p_.b - x1);
                if (el < 20.0 && rng.uniform() < std::exp(-el)) {
                    frac = 0.5;
                    barrier = p_.a;
                } else if (eu < 20.0 && rng.uniform() < std::exp(-eu)) {
                    frac = 0.5;
                    barrier = p_.b;
                }
            }
            if (frac >= 0.0) {
                const double hc = std::clamp(frac, 0.0, 1.0) * h;
                obs.segment(t, hc, x, barrier);
                t += hc;
                const double post = barrier == p_.a ? p_.alpha : p_.beta;
                if (!controlled_ || !obs.intervene(t, barrier, post)) return finish(barrier);
                x = post;
                continue;
            }
            obs.segment(t, h, x, x1);
            x = x1;
            if (at_jump) {
                t = next_jump;
                x += rng.exponential(m_.jump_scale);
                next_jump = t + rng.exponential(m_.jump_rate);
                if (x >= p_.b) {
                    if (!controlled_ || !obs.intervene(t, x, p_.beta)) return finish(x);
                    x = p_.beta;
                }
            } else {
                t += h;
            }
            obs.sample(t, x);
        }
        return finish(x);
    }

private:
    const ModelParams& m_;
    const BandPolicy& p_;
    const SimConfig& cfg_;
    bool controlled_;
    bool use_grid_ = true;
    double sqrt_dt_ = 0.0;
    double bridge_scale_dt_ = 0.0;
};

// Discounted running cost plus intervention bookkeeping.
class CostObserver {
public:
    CostObserver(const ModelParams& m, const CostParams& k, const SimConfig& cfg, PathRecord* record)
        : m_(m),
          k_(k),
          record_(record),
          dt_(cfg.dt),
          inv_dt_(1.0 / cfg.dt),
          dt_decay_(std::exp(-m.discount * cfg.dt)),
          dt_moments_(discount_moments(m.discount, cfg.dt)) {}

    void segment(double t, double h, double x0, double x1) {
        if (!(h > 0.0)) return;
        const auto M = h == dt_ ? dt_moments_ : discount_moments(m_.discount, h);
        const double u0 = x0 - m_.target;
        const double inv_h = h == dt_ ? inv_dt_ : 1.0 / h;
        const double slope = (x1 - x0) * inv_h;
        const double s2 = m_.sigma * m_.sigma;
        // E[(X_s - rho)^2] under the Brownian bridge between the endpoints.
        const double val = u0 * u0 * M[0] + (2.0 * u0 * slope + s2) * M[1] + (slope * slope - s2 * inv_h) * M[2];
        // Consecutive segments share endpoints, so e^{-lambda t} is carried forward.
        const double disc = t == next_t_ ? next_disc_ : std::exp(-m_.discount * t);
        running_ += disc * val;
        next_t_ = t + h;
        next_disc_ = disc * (h == dt_ ? dt_decay_ : std::exp(-m_.discount * h));
    }
    bool intervene(double t, double pre, double post) {
        intervention_terms_.push_back(std::exp(-m_.discount * t) * intervention_cost(post - pre, k_));
        if (record_) {
            record_->intervention_times.push_back(t);
            record_->intervention_sizes.push_back(post - pre);
            record_->pre_states.push_back(pre);
            record_->post_states.push_back(post);
        }
        return true;
    }
    void sample(double t, double x) {
        if (record_ && sample_grid_) record_->grid_samples.emplace_back(t, x);
    }

    void enable_samples() { sample_grid_ = true; }
    double running() const { return running_; }
    double total() const {
        double acc = running_;
        for (double v : intervention_terms_) acc += v;
        return acc;
    }

private:
    const ModelParams& m_;
    const CostParams& k_;
    PathRecord* record_;
    double dt_;
    double inv_dt_;
    double dt_decay_;
    std::array<double, 3> dt_moments_;
    double running_ = 0.0;
    double next_t_ = -1.0;
    double next_disc_ = 1.0;
    std::vector<double> intervention_terms_;
    bool sample_grid_ = false;
};

void require_sim_config(const SimConfig& cfg) {
    if (!(cfg.dt > 0.0)) throw Error(ErrorKind::ConfigError, "dt must be > 0");
    if (!(cfg.horizon > 0.0)) throw Error(ErrorKind::ConfigError, "horizon must be > 0");
    if (cfg.paths < 1) throw Error(ErrorKind::ConfigError, "paths must be >= 1");
}

}  // namespace

PathRecord simulate_path(const ModelParams& model, const CostParams& costs, const BandPolicy& bands, double x0,
                         const SimConfig& cfg, std::uint64_t path_seed) {
    require_sim_config(cfg);
    bands.require_ordered();
    PathRecord rec;
    CostObserver obs(model, costs, cfg, &rec);
    if (cfg.record_grid) {
        obs.enable_samples();
        rec.grid_samples.emplace_back(0.0, x0);
    }
    CounterRng rng(path_seed);
    PathWalker walker(model, bands, cfg, true);
    rec.end_state = walker.run(x0, cfg.horizon, rng, obs, &rec.end_time);
    rec.running_cost = obs.running();
    rec.discounted_cost = rec.running_cost;
    for (std::size_t i = 0; i < rec.intervention_times.size(); ++i) {
        rec.discounted_cost +=
            std::exp(-model.discount * rec.intervention_times[i]) * intervention_cost(rec.intervention_sizes[i], costs);
    }
    return rec;
}

double sample_increment(const ModelParams& m, double t, CounterRng& rng) {
    double y = m.mu * t + (m.sigma > 0.0 ? m.sigma * std::sqrt(t) * rng.normal() : 0.0);
    if (m.jump_rate > 0.0) {
        for (double s = rng.exponential(m.jump_rate); s <= t; s += rng.exponential(m.jump_rate)) {
            y += rng.exponential(m.jump_scale);
        }
    }
    return y;
}

double certified_horizon(const ModelParams& m, const BandPolicy& p, double bias_tol) {
    if (!(bias_tol > 0.0)) throw Error(ErrorKind::ConfigError, "bias tolerance must be > 0");
    const double sup_phi = std::max(opportunity_cost(p.a, m), opportunity_cost(p.b, m));
    const double bound0 = sup_phi / m.discount;
    if (bound0 <= bias_tol) return 1e-9;
    return std::log(bound0 / bias_tol) / m.discount;
}

ValueEstimate estimate_value(const ModelParams& model, const CostParams& costs, const BandPolicy& bands, double x0,
                             const SimConfig& cfg) {
    require_sim_config(cfg);
    bands.require_ordered();
    std::vector<double> values(static_cast<std::size_t>(cfg.paths));
    PathWalker walker(model, bands, cfg, true);
    parallel_for(cfg.paths, cfg, [&](std::int64_t i) {
        CounterRng rng = CounterRng::for_path(cfg.seed, static_cast<std::uint64_t>(i));
        CostObserver obs(model, costs, cfg, nullptr);
        walker.run(x0, cfg.horizon, rng, obs);
        values[static_cast<std::size_t>(i)] = obs.total();
    });
    const auto ms = mean_and_stderr(values);
    ValueEstimate out;
    out.mean = ms.mean;
    out.std_error = ms.std_error;
    out.n = cfg.paths;
    out.horizon = cfg.horizon;
    const double sup_phi = std::max(opportunity_cost(bands.a, model), opportunity_cost(bands.b, model));
    out.truncation_bound = std::exp(-model.discount * cfg.horizon) * sup_phi / model.discount;
    return out;
}

std::vector<double> Histogram::cdf() const {
    std::vector<double> out(mass.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < mass.size(); ++i) {
        acc += mass[i];
        out[i] = acc;
    }
    return out;
}

namespace {

class OccupationObserver {
public:
    OccupationObserver(double lo, double hi, int bins) : lo_(lo), hi_(hi), width_((hi - lo) / bins), time_(bins) {}

    void segment(double, double h, double x0, double x1) {
        if (!(h > 0.0)) return;
        total_ += h;
        const double lo = std::min(x0, x1);
        const double hi = std::max(x0, x1);
        if (hi - lo <= 0.0) {
            add_point(x0, h);
            return;
        }
        // Time is spread uniformly over [lo, hi] along the linear segment.
        const double rate = h / (hi - lo);
        outside_ += rate * (std::max(0.0, std::min(hi, lo_) - lo) + std::max(0.0, hi - std::max(lo, hi_)));
        const double clo = std::max(lo, lo_);
        const double chi = std::min(hi, hi_);
        if (!(chi > clo)) return;
        const int n = static_cast<int>(time_.size());
        int i0 = std::clamp(static_cast<int>((clo - lo_) / width_), 0, n - 1);
        const int i1 = std::clamp(static_cast<int>((chi - lo_) / width_), 0, n - 1);
        for (int i = i0; i <= i1; ++i) {
            const double blo = std::max(clo, lo_ + i * width_);
            const double bhi = i == n - 1 ? chi : std::min(chi, lo_ + (i + 1) * width_);
            if (bhi > blo) time_[static_cast<std::size_t>(i)] += rate * (bhi - blo);
        }
    }
    bool intervene(double, double, double) {
        ++cycles_;
        return true;
    }
    void sample(double, double) {}

    const std::vector<double>& time() const { return time_; }
    double total() const { return total_; }
    double outside() const { return outside_; }
    std::int64_t cycles() const { return cycles_; }

private:
    void add_point(double x, double h) {
        if (x < lo_ || x > hi_) {
            outside_ += h;
            return;
        }
        const int n = static_cast<int>(time_.size());
        time_[static_cast<std::size_t>(std::clamp(static_cast<int>((x - lo_) / width_), 0, n - 1))] += h;
    }

    double lo_, hi_, width_;
    std::vector<double> time_;
    double total_ = 0.0;
    double outside_ = 0.0;
    std::int64_t cycles_ = 0;
};

}  // namespace

Histogram empirical_occupation(const ModelParams& model, const BandPolicy& bands, const SimConfig& cfg, int bins,
                               double x0) {
    require_sim_config(cfg);
    bands.require_ordered();
    if (bins < 1) throw Error(ErrorKind::ConfigError, "bins must be >= 1");
    std::vector<OccupationObserver> per_path(static_cast<std::size_t>(cfg.paths),
                                             OccupationObserver(bands.a, bands.b, bins));
    PathWalker walker(model, bands, cfg, true);
    parallel_for(cfg.paths, cfg, [&](std::int64_t i) {
        CounterRng rng = CounterRng::for_path(cfg.seed, static_cast<std::uint64_t>(i));
        walker.run(x0, cfg.horizon, rng, per_path[static_cast<std::size_t>(i)]);
    });

    Histogram hist;
    hist.lo = bands.a;
    hist.hi = bands.b;
    hist.mass.assign(static_cast<std::size_t>(bins), 0.0);
    double total = 0.0;
    for (const auto& o : per_path) {
        for (std::size_t j = 0; j < hist.mass.size(); ++j) hist.mass[j] += o.time()[j];
        total += o.total();
        hist.outside_time += o.outside();
        hist.cycles += o.cycles();
    }
    hist.total_time = total;
    const double inside = pairwise_sum(hist.mass.data(), hist.mass.size());
    if (inside > 0.0) {
        for (double& m : hist.mass) m /= inside;
    }
    if (hist.cycles < 100) {
        hist.warning = "only " + std::to_string(hist.cycles) + " regeneration cycles observed";
    }
    return hist;
}

Histogram empirical_occupation(const ModelParams& model, const BandPolicy& bands, const SimConfig& cfg, int bins) {
    return empirical_occupation(model, bands, cfg, bins, bands.alpha);
}

namespace {

struct NullObserver {
    void segment(double, double, double, double) {}
    bool intervene(double, double, double) { return true; }
    void sample(double, double) {}
};

struct StopAtFirstExit {
    void segment(double, double, double, double) {}
    bool intervene(double, double, double) { return false; }
    void sample(double, double) {}
};

}  // namespace

ProportionEstimate estimate_transient_mc(const ModelParams& model, const BandPolicy& bands,
                                         const TransientQuery& query, const SimConfig& cfg) {
    require_sim_config(cfg);
    bands.require_ordered();
    if (!(query.q > 0.0)) throw Error(ErrorKind::DomainError, "q must be > 0");
    std::vector<double> hits(static_cast<std::size_t>(cfg.paths));
    PathWalker walker(model, bands, cfg, true);
    parallel_for(cfg.paths, cfg, [&](std::int64_t i) {
        CounterRng rng = CounterRng::for_path(cfg.seed, static_cast<std::uint64_t>(i));
        const double T = rng.exponential(query.q);
        NullObserver obs;
        const double xT = walker.run(query.x, T, rng, obs);
        hits[static_cast<std::size_t>(i)] = (xT >= query.interval.lo && xT <= query.interval.hi) ? 1.0 : 0.0;
    });
    ProportionEstimate out;
    out.n = cfg.paths;
    out.p_hat = pairwise_sum(hits.data(), hits.size()) / static_cast<double>(cfg.paths);
    out.std_error = std::sqrt(out.p_hat * (1.0 - out.p_hat) / static_cast<double>(cfg.paths));
    return out;
}

MeanEstimate estimate_exit_time_mc(const ModelParams& model, const BandPolicy& bands, double x0,
                                   const SimConfig& cfg) {
    require_sim_config(cfg);
    bands.require_ordered();
    std::vector<double> times(static_cast<std::size_t>(cfg.paths));
    PathWalker walker(model, bands, cfg, false);
    parallel_for(cfg.paths, cfg, [&](std::int64_t i) {
        CounterRng rng = CounterRng::for_path(cfg.seed, static_cast<std::uint64_t>(i));
        StopAtFirstExit obs;
        double tau = 0.0;
        walker.run(x0, cfg.horizon, rng, obs, &tau);
        times[static_cast<std::size_t>(i)] = tau;
    });
    const auto ms = mean_and_stderr(times);
    return {ms.mean, ms.std_error, cfg.paths};
}

}  // namespace levyband
