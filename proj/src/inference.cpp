#include "cil/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace cil {

MessageTable::MessageTable(const MrfModel& model, const ParticleSet& particles) {
    nbrs_.resize(model.n_nodes);
    data_.resize(model.n_nodes);
    for (int s = 0; s < model.n_nodes; ++s) {
        nbrs_[s] = neighbors(model, s);
        data_[s].assign(nbrs_[s].size(),
                        std::vector<double>(particles.nodes[s].size(), 0.0));
    }
}

int MessageTable::slot(int s, int t) const {
    const auto& nb = nbrs_[s];
    for (std::size_t i = 0; i < nb.size(); ++i)
        if (nb[i] == t) return static_cast<int>(i);
    throw std::invalid_argument("MessageTable: t is not a neighbor of s");
}

int BeliefTable::argmin(int s) const {
    const auto& row = b[s];
    int best = 0;
    for (int i = 1; i < static_cast<int>(row.size()); ++i)
        if (row[i] < row[best]) best = i;
    return best;
}

namespace {

/// Message from t to s evaluated at an arbitrary receiver point x, through
/// the given (previous-iteration) tables.
double message_at(const MrfModel& model, const ParticleSet& particles,
                  const MessageTable& msgs, const BeliefTable& beliefs, int t,
                  int s, const WorldPoint& x) {
    const auto& pt = particles.nodes[t];
    const auto& back = msgs.edge(s, t);  // M[s->t] over P_t
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < pt.size(); ++j) {
        double v = pairwise_potential(model, s, t, x, pt[j]) + beliefs.b[t][j] - back[j];
        if (v < best) best = v;
    }
    return best;
}

}  // namespace

double disbelief_at(const MrfModel& model, const UnaryField& field,
                    const ParticleSet& particles, const MessageTable& msgs,
                    const BeliefTable& beliefs, int s, const WorldPoint& x) {
    double b = unary_potential(field, x);
    for (int t : msgs.neighbors_of(s))
        b += message_at(model, particles, msgs, beliefs, t, s, x);
    return b;
}

MessageTable compute_messages(const MrfModel& model, const UnaryField& field,
                              const ParticleSet& particles,
                              const MessageTable& prev_msgs,
                              const BeliefTable& prev_beliefs) {
    (void)field;
    MessageTable out(model, particles);
    for (int s = 0; s < model.n_nodes; ++s) {
        for (int t : out.neighbors_of(s)) {
            auto& msg = out.edge(t, s);
            for (std::size_t i = 0; i < particles.nodes[s].size(); ++i)
                msg[i] = message_at(model, particles, prev_msgs, prev_beliefs, t, s,
                                    particles.nodes[s][i]);
            double lo = *std::min_element(msg.begin(), msg.end());
            for (double& v : msg) v -= lo;
        }
    }
    return out;
}

BeliefTable compute_disbelief(const MrfModel& model, const UnaryField& field,
                              const ParticleSet& particles, const MessageTable& msgs) {
    BeliefTable out;
    out.b.resize(model.n_nodes);
    for (int s = 0; s < model.n_nodes; ++s) {
        const auto& ps = particles.nodes[s];
        out.b[s].resize(ps.size());
        for (std::size_t i = 0; i < ps.size(); ++i) {
            double b = unary_potential(field, ps[i]);
            for (int t : msgs.neighbors_of(s)) b += msgs.get(t, s, static_cast<int>(i));
            out.b[s][i] = b;
        }
    }
    return out;
}

WorldPoint slice_sample_node(const WorldPoint& current,
                             const std::function<double(const WorldPoint&)>& disbelief_fn,
                             Rng& rng, int mcmc_steps, double width) {
    if (mcmc_steps < 1)
        throw std::invalid_argument("slice_sample_node: mcmc_steps must be >= 1");
    double f0 = disbelief_fn(current);
    if (!std::isfinite(f0))
        throw std::runtime_error("slice_sample_node: non-finite disbelief at current point");

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::exponential_distribution<double> expo(1.0);
    WorldPoint x = current;
    double fx = f0;
    for (int m = 0; m < mcmc_steps; ++m) {
        for (int axis = 0; axis < 3; ++axis) {
            double level = fx + expo(rng);  // log-slice below exp(-B)
            double r = unit(rng);
            double lo = x[axis] - r * width;
            double hi = x[axis] + (1.0 - r) * width;
            auto eval = [&](double c) {
                WorldPoint q = x;
                q[axis] = c;
                return disbelief_fn(q);
            };
            // Step-out with doubling, at most 10 expansions per side.
            double step = width;
            for (int e = 0; e < 10 && eval(lo) < level; ++e) {
                lo -= step;
                step *= 2.0;
            }
            step = width;
            for (int e = 0; e < 10 && eval(hi) < level; ++e) {
                hi += step;
                step *= 2.0;
            }
            // Shrinkage sampling.
            for (int it = 0; it < 100; ++it) {
                double c = lo + unit(rng) * (hi - lo);
                double fc = eval(c);
                if (fc <= level) {
                    x[axis] = c;
                    fx = fc;
                    break;
                }
                if (c < x[axis])
                    lo = c;
                else
                    hi = c;
            }
        }
    }
    return x;
}

std::vector<WorldPoint> fit_helix(const std::vector<WorldPoint>& window,
                                  int window_start, int n_nodes) {
    int m = static_cast<int>(window.size());
    if (m < 4 || m > 6)
        throw std::invalid_argument("fit_helix: window length must be in [4, 6]");

    std::vector<Vec3> disp(m - 1);
    double mean_step = 0.0;
    for (int i = 0; i + 1 < m; ++i) {
        disp[i] = window[i + 1] - window[i];
        mean_step += disp[i].norm();
    }
    mean_step /= (m - 1);
    if (mean_step <= 0.0) return {};

    // Axis from second differences of the window: on an exact helix the
    // constant axial component of each displacement cancels, so their
    // differences lie in the circle plane and consecutive cross-products are
    // exactly axial (raw displacement crosses are tilted by the pitch).
    std::vector<Vec3> sd(m - 2);
    for (int i = 0; i + 2 < m; ++i) sd[i] = disp[i + 1] - disp[i];
    Vec3 axis{0, 0, 0};
    Vec3 ref = sd[0].cross(sd[1]);
    for (int i = 0; i + 1 < m - 2; ++i) {
        Vec3 c = sd[i].cross(sd[i + 1]);
        if (c.dot(ref) < 0) c = c * -1.0;
        axis += c;
    }
    if (axis.norm() < 1e-9 * mean_step * mean_step) return {};  // collinear window
    Vec3 w = axis.normalized();

    // Orthonormal frame (e1, e2, w).
    Vec3 seed = std::fabs(w.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    Vec3 e1 = (seed - w * seed.dot(w)).normalized();
    Vec3 e2 = w.cross(e1);

    Vec3 centroid{0, 0, 0};
    for (const auto& p : window) centroid += p;
    centroid = centroid / m;

    std::vector<double> a(m), b(m), z(m);
    for (int i = 0; i < m; ++i) {
        Vec3 q = window[i] - centroid;
        a[i] = q.dot(e1);
        b[i] = q.dot(e2);
        z[i] = q.dot(w);
    }

    // Kasa circle fit in the (a, b) plane: solve the 3x3 normal equations for
    // (2*ca, 2*cb, r^2 - ca^2 - cb^2).
    double s_aa = 0, s_ab = 0, s_bb = 0, s_a = 0, s_b = 0, s_ar = 0, s_br = 0, s_r = 0;
    for (int i = 0; i < m; ++i) {
        double rr = a[i] * a[i] + b[i] * b[i];
        s_aa += a[i] * a[i];
        s_ab += a[i] * b[i];
        s_bb += b[i] * b[i];
        s_a += a[i];
        s_b += b[i];
        s_ar += a[i] * rr;
        s_br += b[i] * rr;
        s_r += rr;
    }
    double A[3][3] = {{s_aa, s_ab, s_a}, {s_ab, s_bb, s_b}, {s_a, s_b, double(m)}};
    double rhs[3] = {s_ar, s_br, s_r};
    // Gaussian elimination with partial pivoting.
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int row = col + 1; row < 3; ++row)
            if (std::fabs(A[row][col]) > std::fabs(A[piv][col])) piv = row;
        if (std::fabs(A[piv][col]) < 1e-14) return {};
        std::swap(A[col], A[piv]);
        std::swap(rhs[col], rhs[piv]);
        for (int row = col + 1; row < 3; ++row) {
            double f = A[row][col] / A[col][col];
            for (int c2 = col; c2 < 3; ++c2) A[row][c2] -= f * A[col][c2];
            rhs[row] -= f * rhs[col];
        }
    }
    double sol[3];
    for (int row = 2; row >= 0; --row) {
        double acc = rhs[row];
        for (int c2 = row + 1; c2 < 3; ++c2) acc -= A[row][c2] * sol[c2];
        sol[row] = acc / A[row][row];
    }
    double ca = sol[0] / 2.0, cb = sol[1] / 2.0;
    double r2 = sol[2] + ca * ca + cb * cb;
    if (!(r2 > 0) || !std::isfinite(r2)) return {};
    double radius = std::sqrt(r2);

    // Unwrapped angles and axial coordinates, linear in the window index.
    std::vector<double> phi(m);
    for (int i = 0; i < m; ++i) {
        phi[i] = std::atan2(b[i] - cb, a[i] - ca);
        if (i > 0) {
            while (phi[i] - phi[i - 1] > 3.14159265358979323846) phi[i] -= 2 * 3.14159265358979323846;
            while (phi[i] - phi[i - 1] < -3.14159265358979323846) phi[i] += 2 * 3.14159265358979323846;
        }
    }
    double s_i = 0, s_ii = 0, s_p = 0, s_ip = 0, s_z = 0, s_iz = 0;
    for (int i = 0; i < m; ++i) {
        s_i += i;
        s_ii += double(i) * i;
        s_p += phi[i];
        s_ip += i * phi[i];
        s_z += z[i];
        s_iz += i * z[i];
    }
    double det = m * s_ii - s_i * s_i;
    double dphi = (m * s_ip - s_i * s_p) / det;
    double phi0 = (s_p - dphi * s_i) / m;
    double dz = (m * s_iz - s_i * s_z) / det;
    double z0 = (s_z - dz * s_i) / m;

    std::vector<WorldPoint> out(n_nodes);
    for (int n = 0; n < n_nodes; ++n) {
        double rel = n - window_start;
        double ang = phi0 + rel * dphi;
        double ax = z0 + rel * dz;
        out[n] = centroid + e1 * (ca + radius * std::cos(ang)) +
                 e2 * (cb + radius * std::sin(ang)) + w * ax;
    }
    return out;
}

namespace {

/// Lowest-energy window of `len` consecutive MAP nodes (unary + in-window
/// pairwise terms).
int best_window_start(const MrfModel& model, const UnaryField& field,
                      const Configuration& xhat, int len) {
    int n = model.n_nodes;
    double best = std::numeric_limits<double>::infinity();
    int best_start = 0;
    for (int start = 0; start + len <= n; ++start) {
        double e = 0.0;
        for (int i = start; i < start + len; ++i)
            e += unary_potential(field, xhat.positions[i]);
        for (int i = start; i + 1 < start + len; ++i)
            e += pairwise_potential(model, i, i + 1, xhat.positions[i],
                                    xhat.positions[i + 1]);
        for (int i = start; i + 2 < start + len; ++i)
            e += pairwise_potential(model, i, i + 2, xhat.positions[i],
                                    xhat.positions[i + 2]);
        if (e < best) {
            best = e;
            best_start = start;
        }
    }
    return best_start;
}

}  // namespace

ParticleSet augment_particles(const InferenceState& state, const MrfModel& model,
                              const UnaryField& field, const CandidateSet& cands,
                              int k) {
    ParticleSet out = state.particles;
    if (!state.map_estimate) return out;
    const auto& xh = state.map_estimate->positions;
    int n = model.n_nodes;

    // P_mobility: direct neighbor estimates plus one apical extrapolation.
    for (int t = 0; t < n; ++t) {
        if (t > 0) out.nodes[t].push_back(xh[t - 1]);
        if (t + 1 < n) out.nodes[t].push_back(xh[t + 1]);
    }
    out.nodes[n - 1].push_back(xh[n - 1] + (xh[n - 1] - xh[n - 2]));

    // P_CI: helix extrapolated from the lowest-energy window.
    int len = std::clamp(5, 4, std::min(6, n));
    int start = best_window_start(model, field, *state.map_estimate, len);
    std::vector<WorldPoint> window(xh.begin() + start, xh.begin() + start + len);
    auto helix = fit_helix(window, start, n);
    for (int t = 0; t < static_cast<int>(helix.size()); ++t)
        out.nodes[t].push_back(helix[t]);

    // P_rotated: 180 degrees about the axis from the basal node through the
    // centroid, recovering wrong-way-round estimates.
    Vec3 centroid{0, 0, 0};
    for (const auto& p : xh) centroid += p;
    centroid = centroid / n;
    Vec3 ax = centroid - xh[0];
    if (ax.norm() > 1e-12) {
        Vec3 d = ax.normalized();
        for (int t = 0; t < n; ++t) {
            Vec3 q = xh[t] - xh[0];
            Vec3 rotated = xh[0] + d * (2.0 * q.dot(d)) - q;
            out.nodes[t].push_back(rotated);
        }
    }

    // P_knn: the k candidates nearest to each node's estimate.
    if (k > 0 && !cands.points.empty()) {
        for (int t = 0; t < n; ++t) {
            std::vector<int> order(cands.points.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
            std::sort(order.begin(), order.end(), [&](int a, int b) {
                return distance(cands.points[a], xh[t]) < distance(cands.points[b], xh[t]);
            });
            for (int i = 0; i < std::min<int>(k, static_cast<int>(order.size())); ++i)
                out.nodes[t].push_back(cands.points[order[i]]);
        }
    }
    return out;
}

ParticleSet decimate_diverse(const ParticleSet& particles, const BeliefTable& beliefs,
                             int target_p, double r_div) {
    if (target_p < 2)
        throw std::invalid_argument("decimate_diverse: target_p must be >= 2");
    ParticleSet out;
    out.nodes.resize(particles.nodes.size());
    for (int s = 0; s < particles.n_nodes(); ++s) {
        const auto& ps = particles.nodes[s];
        std::vector<int> order(ps.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return beliefs.b[s][a] < beliefs.b[s][b];
        });
        std::vector<int> kept, skipped;
        for (int idx : order) {
            if (static_cast<int>(kept.size()) >= target_p) break;
            bool near = false;
            for (int j : kept)
                if (distance(ps[idx], ps[j]) < r_div) {
                    near = true;
                    break;
                }
            (near ? skipped : kept).push_back(idx);
        }
        for (int idx : skipped) {
            if (static_cast<int>(kept.size()) >= target_p) break;
            kept.push_back(idx);
        }
        auto& dst = out.nodes[s];
        for (int idx : kept) dst.push_back(ps[idx]);
        while (static_cast<int>(dst.size()) < target_p) dst.push_back(ps[order[0]]);
    }
    return out;
}

bool detect_plateau(const std::vector<double>& history, int window,
                    double epsilon_scale) {
    if (window < 2) throw std::invalid_argument("detect_plateau: window must be >= 2");
    if (static_cast<int>(history.size()) < window) return false;
    auto first = history.end() - window;
    auto [lo, hi] = std::minmax_element(first, history.end());
    double eps = epsilon_scale * (history.back() + 1.0);
    return *hi - *lo < eps;
}

Configuration retie_shortest_path(const Configuration& cfg) {
    int n = static_cast<int>(cfg.positions.size());
    if (n <= 2) return cfg;
    const auto& pts = cfg.positions;
    int m = n - 1;  // points after the fixed basal start

    std::vector<int> path;
    if (m <= 19) {
        // Held-Karp over open paths starting at point 0.
        std::vector<std::vector<double>> dist(n, std::vector<double>(n));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) dist[i][j] = distance(pts[i], pts[j]);
        std::size_t full = std::size_t(1) << m;
        const double inf = std::numeric_limits<double>::infinity();
        std::vector<std::vector<double>> dp(full, std::vector<double>(m, inf));
        std::vector<std::vector<int>> parent(full, std::vector<int>(m, -1));
        for (int j = 0; j < m; ++j) dp[std::size_t(1) << j][j] = dist[0][j + 1];
        for (std::size_t mask = 1; mask < full; ++mask)
            for (int last = 0; last < m; ++last) {
                if (!(mask & (std::size_t(1) << last)) || dp[mask][last] == inf) continue;
                for (int nxt = 0; nxt < m; ++nxt) {
                    if (mask & (std::size_t(1) << nxt)) continue;
                    std::size_t nm = mask | (std::size_t(1) << nxt);
                    double cand = dp[mask][last] + dist[last + 1][nxt + 1];
                    if (cand < dp[nm][nxt]) {
                        dp[nm][nxt] = cand;
                        parent[nm][nxt] = last;
                    }
                }
            }
        int best_last = 0;
        for (int j = 1; j < m; ++j)
            if (dp[full - 1][j] < dp[full - 1][best_last]) best_last = j;
        std::vector<int> rev;
        std::size_t mask = full - 1;
        int cur = best_last;
        while (cur != -1) {
            rev.push_back(cur + 1);
            int p = parent[mask][cur];
            mask &= ~(std::size_t(1) << cur);
            cur = p;
        }
        path.push_back(0);
        path.insert(path.end(), rev.rbegin(), rev.rend());
    } else {
        // Greedy nearest-neighbor fallback for very long arrays.
        std::vector<bool> used(n, false);
        used[0] = true;
        path.push_back(0);
        for (int step = 1; step < n; ++step) {
            int prev = path.back(), best = -1;
            double bd = std::numeric_limits<double>::infinity();
            for (int j = 0; j < n; ++j) {
                if (used[j]) continue;
                double d = distance(pts[prev], pts[j]);
                if (d < bd) {
                    bd = d;
                    best = j;
                }
            }
            used[best] = true;
            path.push_back(best);
        }
    }

    Configuration out;
    out.positions.reserve(n);
    for (int idx : path) out.positions.push_back(pts[idx]);
    return out;
}

namespace {

Configuration decode_map(const ParticleSet& particles, const BeliefTable& beliefs) {
    Configuration cfg;
    cfg.positions.reserve(particles.nodes.size());
    for (int s = 0; s < particles.n_nodes(); ++s)
        cfg.positions.push_back(particles.nodes[s][beliefs.argmin(s)]);
    return cfg;
}

}  // namespace

RunResult run_single(const MrfModel& model, const UnaryField& field,
                     const CandidateSet& cands, const WorldPoint& basal,
                     const Box3& voi, const InferenceConfig& cfg, Rng& rng) {
    model.validate();
    if (!voi.contains(basal))
        throw std::invalid_argument("run_single: basal point outside the VOI");

    // Straight-line initialization in a random direction; the whole segment
    // must stay inside the VOI, clamped after 100 failed attempts.
    int n = model.n_nodes;
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<WorldPoint> line(n);
    bool inside = false;
    for (int attempt = 0; attempt < 100 && !inside; ++attempt) {
        Vec3 dir{gauss(rng), gauss(rng), gauss(rng)};
        if (dir.norm() < 1e-9) continue;
        dir = dir.normalized();
        inside = true;
        for (int s = 0; s < n; ++s) {
            line[s] = basal + dir * (model.d_st1 * s);
            if (!voi.contains(line[s])) inside = false;
        }
    }
    if (!inside)
        for (int s = 0; s < n; ++s) line[s] = voi.clamp(line[s]);

    int p = cfg.particles_per_node;
    double jitter = cfg.init_jitter_factor * model.d_st1;
    ParticleSet particles;
    particles.nodes.resize(n);
    for (int s = 0; s < n; ++s) {
        particles.nodes[s].push_back(line[s]);
        for (int i = 1; i < p; ++i)
            particles.nodes[s].push_back(
                line[s] + Vec3{gauss(rng) * jitter, gauss(rng) * jitter, gauss(rng) * jitter});
    }

    MessageTable msgs(model, particles);
    BeliefTable beliefs = compute_disbelief(model, field, particles, msgs);

    Configuration xhat = decode_map(particles, beliefs);
    double energy = total_energy(model, field, xhat);
    Configuration best = xhat;
    double best_energy = energy;

    RunDiagnostics diag;
    std::vector<double> history{energy};
    double r_div = cfg.diversity_radius_factor * model.d_st1;

    for (int iter = 0; iter < cfg.n_iterations; ++iter) {
        // Slice-sample every particle against the previous iteration's tables.
        ParticleSet sampled = particles;
        for (int s = 0; s < n; ++s) {
            auto fn = [&](const WorldPoint& x) {
                return disbelief_at(model, field, particles, msgs, beliefs, s, x);
            };
            for (auto& part : sampled.nodes[s])
                part = slice_sample_node(part, fn, rng, cfg.mcmc_steps, model.d_st1);
        }

        InferenceState state{std::move(sampled), msgs, beliefs, xhat};
        ParticleSet augmented =
            augment_particles(state, model, field, cands, cfg.k_nearest);

        // Score the augmented set through the previous tables, then decimate.
        BeliefTable aug_beliefs;
        aug_beliefs.b.resize(n);
        for (int s = 0; s < n; ++s) {
            aug_beliefs.b[s].resize(augmented.nodes[s].size());
            for (std::size_t i = 0; i < augmented.nodes[s].size(); ++i)
                aug_beliefs.b[s][i] = disbelief_at(model, field, particles, msgs,
                                                   beliefs, s, augmented.nodes[s][i]);
        }
        ParticleSet next = decimate_diverse(augmented, aug_beliefs, p, r_div);

        // Rebase the previous tables onto the new particle positions so the
        // message recursion stays consistently indexed.
        BeliefTable prev_b;
        prev_b.b.resize(n);
        MessageTable prev_m(model, next);
        for (int s = 0; s < n; ++s) {
            prev_b.b[s].resize(next.nodes[s].size());
            for (std::size_t i = 0; i < next.nodes[s].size(); ++i)
                prev_b.b[s][i] = disbelief_at(model, field, particles, msgs, beliefs,
                                              s, next.nodes[s][i]);
        }
        for (int s = 0; s < n; ++s)
            for (int t : prev_m.neighbors_of(s))
                for (std::size_t i = 0; i < next.nodes[s].size(); ++i)
                    prev_m.set(t, s, static_cast<int>(i),
                               message_at(model, particles, msgs, beliefs, t, s,
                                          next.nodes[s][i]));

        particles = std::move(next);
        msgs = compute_messages(model, field, particles, prev_m, prev_b);
        beliefs = compute_disbelief(model, field, particles, msgs);

        xhat = decode_map(particles, beliefs);
        energy = total_energy(model, field, xhat);
        if (energy < best_energy) {
            best_energy = energy;
            best = xhat;
        }
        history.push_back(energy);

        if (detect_plateau(history, cfg.plateau_window, cfg.plateau_epsilon_scale)) {
            ++diag.plateaus;
            Configuration retied = retie_shortest_path(xhat);
            if (retied.positions != xhat.positions) {
                ++diag.reties;
                xhat = retied;
                double e2 = total_energy(model, field, xhat);
                if (e2 < best_energy) {
                    best_energy = e2;
                    best = xhat;
                }
            }
            history.clear();
        }
    }

    return RunResult{std::move(best), best_energy, cfg.n_iterations, diag};
}

RunResult localize(const MrfModel& model, const UnaryField& field,
                   const CandidateSet& cands, const WorldPoint& basal,
                   const Box3& voi, const InferenceConfig& cfg, int n_runs,
                   std::uint64_t seed) {
    if (n_runs < 1) throw std::invalid_argument("localize: n_runs must be >= 1");
    RunResult best;
    bool have = false;
    for (int r = 0; r < n_runs; ++r) {
        Rng rng(derive_seed(seed, "run", static_cast<std::uint64_t>(r)));
        RunResult res = run_single(model, field, cands, basal, voi, cfg, rng);
        if (!have || res.energy < best.energy) {
            best = std::move(res);
            have = true;
        }
    }
    return best;
}

}  // namespace cil
