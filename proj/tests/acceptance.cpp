// Acceptance gate: one line per criterion, checked with pinned tolerances.
// Every criterion runs even after a failure so a regression report is always
// complete. Exit code is the number of failed criteria (capped at 99).
//
// Usage: acceptance [repo_root]   (repo_root defaults to ".", used to locate
// the golden directory)

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "reference_impl.hpp"
#include "test_util.hpp"
#include "zeresfdg/config.hpp"
#include "zeresfdg/controller.hpp"
#include "zeresfdg/experiment.hpp"
#include "zeresfdg/guidance.hpp"
#include "zeresfdg/qsilk.hpp"
#include "zeresfdg/rng.hpp"
#include "zeresfdg/sampler.hpp"
#include "zeresfdg/tensor.hpp"

using namespace zeresfdg;

namespace {

constexpr double kTol = 1e-6;

struct Outcome {
    bool pass = true;
    std::string detail;
};

// Records the first failure with its position; later failures only bump the
// count so the detail line stays readable.
struct Gate {
    bool pass = true;
    int64_t failures = 0;
    std::ostringstream first;

    void expect(bool ok, const std::function<void(std::ostream&)>& describe) {
        if (ok) {
            return;
        }
        if (pass) {
            describe(first);
        }
        pass = false;
        failures++;
    }

    Outcome done() const {
        if (pass) {
            return {true, ""};
        }
        std::ostringstream msg;
        msg << first.str() << " (" << failures << " total failure" << (failures == 1 ? "" : "s")
            << ")";
        return {false, msg.str()};
    }
};

double elapsed_seconds(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

ControllerState pinned_state(GuidanceMode mode) {
    // rho deep inside the target side of the band survives one EMA update with
    // any observation in [0, 1], so the branch cannot flip mid-check.
    ControllerState st;
    st.initialized = true;
    st.mode = mode;
    st.rho = mode == GuidanceMode::RescaleFDG ? 0.99 : 0.01;
    return st;
}

const std::vector<Shape4>& corpus_shapes() {
    static const std::vector<Shape4> shapes = {
        {1, 1, 8, 8}, {2, 4, 32, 32}, {1, 3, 16, 16}, {2, 2, 5, 7}};
    return shapes;
}

// 1. Residual after zero-projection is orthogonal to y_u in every sample.
Outcome residual_orthogonality() {
    Gate g;
    const auto start = std::chrono::steady_clock::now();
    for (int trial = 0; trial < 1000; trial++) {
        const Shape4 shape = corpus_shapes()[static_cast<size_t>(trial) % corpus_shapes().size()];
        const Tensor4 y_c = random_tensor(shape, 1000 + 2 * static_cast<uint64_t>(trial));
        const Tensor4 y_u = random_tensor(shape, 1001 + 2 * static_cast<uint64_t>(trial));
        const ZeroProjection zp = zero_project(y_c, y_u);
        const std::vector<double> ru = dot_per_sample(zp.residual, y_u);
        const std::vector<double> rr = dot_per_sample(zp.residual, zp.residual);
        const std::vector<double> uu = dot_per_sample(y_u, y_u);
        for (size_t b = 0; b < ru.size(); b++) {
            const double cosine = std::abs(ru[b]) / std::max(std::sqrt(rr[b] * uu[b]), 1e-30);
            g.expect(cosine <= kTol, [&](std::ostream& o) {
                o << "trial " << trial << " sample " << b << ": normalized residual dot "
                  << cosine;
            });
        }
    }
    const double secs = elapsed_seconds(start);
    g.expect(secs < 5.0, [&](std::ostream& o) { o << "took " << secs << " s, budget 5 s"; });
    return g.done();
}

// 2. Band split: high is literally the float32 subtraction delta - low, the
// re-added bands match delta, and the low-pass passes constants through.
Outcome band_partition() {
    Gate g;
    GuidanceConfig cfg;
    int trial = 0;
    for (double sigma : {0.5, 1.0, 2.0}) {
        cfg.sigma_split = sigma;
        for (const Shape4& shape : corpus_shapes()) {
            const Tensor4 delta = random_tensor(shape, 7000 + static_cast<uint64_t>(trial++), 2.0f);
            const FdgBands bands = fdg_reweight(delta, cfg);
            for (size_t i = 0; i < delta.data.size(); i++) {
                const float expected = delta.data[i] - bands.low.data[i];
                g.expect(bands.high.data[i] == expected, [&](std::ostream& o) {
                    o << "sigma " << sigma << " element " << i << ": high " << bands.high.data[i]
                      << " vs delta-low " << expected;
                });
                const double readd =
                    static_cast<double>(bands.low.data[i]) + static_cast<double>(bands.high.data[i]);
                g.expect(near_abs_rel(readd, delta.data[i], kTol), [&](std::ostream& o) {
                    o << "sigma " << sigma << " element " << i << ": low+high " << readd
                      << " vs delta " << delta.data[i];
                });
            }
        }
        const Tensor4 flat({2, 3, 12, 12}, 3.25f);
        const Tensor4 blurred = gaussian_blur(flat, GaussianKernel::make(sigma));
        for (size_t i = 0; i < blurred.data.size(); i++) {
            g.expect(std::abs(blurred.data[i] - 3.25) <= kTol, [&](std::ostream& o) {
                o << "sigma " << sigma << ": constant drifted to " << blurred.data[i];
            });
        }
    }
    return g.done();
}

// 3. Full rescale matches the target std; zero blend is the exact identity.
Outcome rescale_contract() {
    Gate g;
    for (uint64_t seed = 20; seed < 26; seed++) {
        const Shape4 shape = corpus_shapes()[seed % corpus_shapes().size()];
        const Tensor4 y_cfg = random_tensor(shape, seed, seed % 2 == 0 ? 3.0f : 0.25f);
        const Tensor4 y_c = random_tensor(shape, seed + 100);
        const std::vector<double> target = std_per_sample(y_c);
        const std::vector<double> before = std_per_sample(y_cfg);

        const Tensor4 full = rescale_to_std(y_cfg, target, 1.0);
        const std::vector<double> after = std_per_sample(full);
        for (size_t b = 0; b < after.size(); b++) {
            if (before[b] <= 1e-8) {
                continue;
            }
            const double rel = std::abs(after[b] - target[b]) / std::max(target[b], 1e-30);
            g.expect(rel <= kTol, [&](std::ostream& o) {
                o << "seed " << seed << " sample " << b << ": std " << after[b] << " vs target "
                  << target[b] << " (rel " << rel << ")";
            });
        }

        const Tensor4 identity = rescale_to_std(y_cfg, target, 0.0);
        g.expect(same_bits(identity, y_cfg),
                 [&](std::ostream& o) { o << "seed " << seed << ": alpha=0 output differs"; });
    }
    return g.done();
}

// 4. Unit band gains and zero blend collapse the rescale branch to plain
// classifier-free guidance.
Outcome cfg_reduction() {
    Gate g;
    for (double s : {1.0, 4.5, 7.5}) {
        GuidanceConfig cfg;
        cfg.scale = s;
        cfg.lambda_low = 1.0;
        cfg.lambda_high = 1.0;
        cfg.alpha_rescale = 0.0;
        for (uint64_t seed = 40; seed < 43; seed++) {
            const Shape4 shape = corpus_shapes()[seed % corpus_shapes().size()];
            const Tensor4 y_c = random_tensor(shape, seed);
            const Tensor4 y_u = random_tensor(shape, seed + 50);
            const auto [out, st] =
                zeresfdg_step(y_c, y_u, cfg, pinned_state(GuidanceMode::RescaleFDG));
            g.expect(out.mode_used == GuidanceMode::RescaleFDG,
                     [&](std::ostream& o) { o << "pinned state lost the rescale branch"; });
            for (size_t i = 0; i < out.y.data.size(); i++) {
                const double plain =
                    y_u.data[i] + s * (static_cast<double>(y_c.data[i]) - y_u.data[i]);
                g.expect(near_abs_rel(out.y.data[i], plain, kTol), [&](std::ostream& o) {
                    o << "s=" << s << " seed " << seed << " element " << i << ": " << out.y.data[i]
                      << " vs " << plain;
                });
            }
        }
    }
    return g.done();
}

// 5. Hand-enumerated hysteresis walk and exact geometric EMA convergence.
Outcome controller_contract() {
    Gate g;
    const GuidanceConfig cfg;
    const double walk[] = {0.50, 0.61, 0.50, 0.44};
    const GuidanceMode expected[] = {GuidanceMode::CFGZeroFD, GuidanceMode::RescaleFDG,
                                     GuidanceMode::RescaleFDG, GuidanceMode::CFGZeroFD};
    GuidanceMode mode = GuidanceMode::CFGZeroFD;
    for (int k = 0; k < 4; k++) {
        mode = apply_hysteresis(walk[k], mode, cfg);
        g.expect(mode == expected[k], [&](std::ostream& o) {
            o << "walk step " << k << " (rho " << walk[k] << "): got " << mode_name(mode)
              << ", expected " << mode_name(expected[k]);
        });
    }

    ControllerState st;
    st = controller_update(st, 0.9, cfg);  // seeds rho = 0.9
    const double r = 0.3;
    for (int k = 1; k <= 50; k++) {
        st = controller_update(st, r, cfg);
        const double expected_gap = std::pow(cfg.beta_ema, k) * (0.9 - r);
        g.expect(std::abs((st.rho - r) - expected_gap) <= 1e-9, [&](std::ostream& o) {
            o << "EMA step " << k << ": gap " << st.rho - r << " vs " << expected_gap;
        });
    }
    return g.done();
}

// 6. Quantile clamp on heavy-tailed data: bounds honored, non-finite values
// eliminated, and a repeat clamp only ever touches values sitting exactly on
// the first pass bounds.
Outcome quantile_clamp_contract() {
    Gate g;
    const QSilkConfig cfg;
    const Shape4 shape{2, 1, 100, 100};  // 10,000 elements per sample

    Tensor4 x(shape);
    GaussianStream gs(123);
    for (auto& v : x.data) {
        float denom = gs.next();
        while (denom == 0.0f) {
            denom = gs.next();
        }
        v = gs.next() / denom;  // Cauchy-distributed: heavy tails guaranteed
    }

    const auto [y, stats] = quantile_clamp(x, cfg);
    const int64_t m = shape.per_sample();
    std::vector<double> lo1(static_cast<size_t>(shape.n));
    std::vector<double> hi1(static_cast<size_t>(shape.n));
    for (int64_t b = 0; b < shape.n; b++) {
        std::vector<double> vals(x.data.begin() + b * m, x.data.begin() + (b + 1) * m);
        lo1[static_cast<size_t>(b)] = refimpl::quantile_direct(vals, cfg.q_lo);
        hi1[static_cast<size_t>(b)] = refimpl::quantile_direct(std::move(vals), cfg.q_hi);
        const double slack =
            kTol * std::max({1.0, std::abs(lo1[static_cast<size_t>(b)]),
                             std::abs(hi1[static_cast<size_t>(b)])});
        for (int64_t i = b * m; i < (b + 1) * m; i++) {
            const float v = y.data[static_cast<size_t>(i)];
            g.expect(v >= lo1[static_cast<size_t>(b)] - slack &&
                         v <= hi1[static_cast<size_t>(b)] + slack,
                     [&](std::ostream& o) {
                         o << "sample " << b << " element " << i << ": " << v
                           << " outside oracle bounds [" << lo1[static_cast<size_t>(b)] << ", "
                           << hi1[static_cast<size_t>(b)] << "]";
                     });
        }
        g.expect(stats.clipped_fraction[static_cast<size_t>(b)] > 0.0, [&](std::ostream& o) {
            o << "sample " << b << ": heavy tails produced no clipping";
        });
    }

    // Re-applying the first pass bounds changes nothing.
    for (int64_t b = 0; b < shape.n; b++) {
        for (int64_t i = b * m; i < (b + 1) * m; i++) {
            const float v = y.data[static_cast<size_t>(i)];
            float again = v;
            if (v < lo1[static_cast<size_t>(b)]) {
                again = static_cast<float>(lo1[static_cast<size_t>(b)]);
            } else if (v > hi1[static_cast<size_t>(b)]) {
                again = static_cast<float>(hi1[static_cast<size_t>(b)]);
            }
            g.expect(again == v, [&](std::ostream& o) {
                o << "same-bounds re-clip moved element " << i << " from " << v << " to " << again;
            });
        }
    }

    // A full second pass recomputes quantiles on the flattened tails; the only
    // values it may move are those parked exactly on a first pass bound.
    const auto [y2, stats2] = quantile_clamp(y, cfg);
    for (int64_t b = 0; b < shape.n; b++) {
        const float flo = static_cast<float>(lo1[static_cast<size_t>(b)]);
        const float fhi = static_cast<float>(hi1[static_cast<size_t>(b)]);
        for (int64_t i = b * m; i < (b + 1) * m; i++) {
            if (y2.data[static_cast<size_t>(i)] == y.data[static_cast<size_t>(i)]) {
                continue;
            }
            const float v = y.data[static_cast<size_t>(i)];
            g.expect(v == flo || v == fhi, [&](std::ostream& o) {
                o << "second pass moved interior element " << i << " (" << v << ")";
            });
        }
    }

    // Injected specials are replaced by finite bound values.
    Tensor4 dirty = x;
    dirty.data[5] = std::numeric_limits<float>::infinity();
    dirty.data[17] = -std::numeric_limits<float>::infinity();
    dirty.data[29] = std::numeric_limits<float>::quiet_NaN();
    const auto [cleaned, dirty_stats] = quantile_clamp(dirty, cfg);
    g.expect(cleaned.all_finite(),
             [&](std::ostream& o) { o << "non-finite values survived the clamp"; });
    g.expect(dirty_stats.nonfinite_count[0] == 3, [&](std::ostream& o) {
        o << "non-finite count " << dirty_stats.nonfinite_count[0] << ", expected 3";
    });
    return g.done();
}

// 7. Detail injection: exact identity at zero strength, pure unsharp mask in
// the degenerate configuration, and a ramp that sleeps through the first
// ceil(0.8 * steps) steps.
Outcome micro_injection_contract() {
    Gate g;
    const Tensor4 x = random_tensor({2, 2, 10, 12}, 60, 1.5f);
    const QSilkConfig cfg;
    g.expect(same_bits(micro_detail_inject(x, nullptr, 0.0, cfg), x),
             [&](std::ostream& o) { o << "alpha_t=0 is not a bit-exact identity"; });

    QSilkConfig open = cfg;
    open.edge_gate_strength = 0.0;
    open.depth_gate_enabled = false;
    const Tensor4 injected = micro_detail_inject(x, nullptr, 1.0, open);
    const Tensor4 blurred = refimpl::blur_direct(x, open.sigma_detail);
    for (size_t i = 0; i < x.data.size(); i++) {
        const double unsharp = 2.0 * static_cast<double>(x.data[i]) - blurred.data[i];
        g.expect(near_abs_rel(injected.data[i], unsharp, kTol), [&](std::ostream& o) {
            o << "element " << i << ": " << injected.data[i] << " vs 2x-blur " << unsharp;
        });
    }

    for (int64_t n : {int64_t{10}, int64_t{25}, int64_t{50}}) {
        int64_t silent = 0;
        for (int64_t i = 0; i < n; i++) {
            if (alpha_ramp(i, n, cfg) == 0.0) {
                silent++;
            } else {
                break;
            }
        }
        const int64_t expected = static_cast<int64_t>(std::ceil(0.8 * static_cast<double>(n)));
        g.expect(silent == expected, [&](std::ostream& o) {
            o << n << " steps: " << silent << " silent steps, expected " << expected;
        });
        g.expect(std::abs(alpha_ramp(n - 1, n, cfg) - cfg.alpha_max) <= 1e-12,
                 [&](std::ostream& o) { o << n << " steps: final ramp is not alpha_max"; });
    }
    return g.done();
}

// 8. The shipped default configuration runs clean inside the time budget and
// the committed golden outputs still reproduce byte for byte.
Outcome default_run_and_goldens(const std::string& repo_root) {
    Gate g;
    const ExperimentConfig cfg;
    const ToyModel model{generate_pattern(cfg.target_cond, cfg.run.shape),
                         generate_pattern(cfg.target_uncond, cfg.run.shape), cfg.run.seed};
    const SigmaSchedule schedule = SigmaSchedule::karras(
        cfg.run.steps, cfg.run.sigma_max, cfg.run.sigma_min, cfg.run.schedule_rho);

    const auto start = std::chrono::steady_clock::now();
    const RunResult result = run(model, schedule, cfg.guidance, cfg.qsilk);
    const double secs = elapsed_seconds(start);

    g.expect(result.final_image.all_finite(),
             [&](std::ostream& o) { o << "default run produced non-finite values"; });
    for (const StepTrace& t : result.traces) {
        g.expect(std::isfinite(t.r_hf) && std::isfinite(t.rho) && std::isfinite(t.std_yc) &&
                     std::isfinite(t.std_ycfg),
                 [&](std::ostream& o) { o << "non-finite trace at step " << t.step_index; });
    }
    g.expect(secs < 10.0, [&](std::ostream& o) { o << "took " << secs << " s, budget 10 s"; });

    const int rc = cmd_verify_golden(repo_root + "/golden");
    g.expect(rc == 0, [&](std::ostream& o) { o << "verify-golden exited " << rc; });
    return g.done();
}

// 9. Stronger guidance should land strictly closer to the conditional target
// than weak guidance, across seeds.
Outcome guidance_direction() {
    Gate g;
    const ExperimentConfig base;
    const Tensor4 cond = generate_pattern(base.target_cond, base.run.shape);
    const Tensor4 uncond = generate_pattern(base.target_uncond, base.run.shape);
    const SigmaSchedule schedule = SigmaSchedule::karras(
        base.run.steps, base.run.sigma_max, base.run.sigma_min, base.run.schedule_rho);
    for (uint64_t seed = 1; seed <= 5; seed++) {
        const ToyModel model{cond, uncond, seed};
        GuidanceConfig strong = base.guidance;
        strong.scale = 4.5;
        GuidanceConfig weak = base.guidance;
        weak.scale = 1.0;
        const double d_strong =
            l2_distance(run(model, schedule, strong, base.qsilk).final_image, cond);
        const double d_weak = l2_distance(run(model, schedule, weak, base.qsilk).final_image, cond);
        g.expect(d_strong < d_weak, [&](std::ostream& o) {
            o << "seed " << seed << ": s=4.5 distance " << d_strong << " not below s=1.0 distance "
              << d_weak;
        });
    }
    return g.done();
}

// 10. The guided step agrees with the straight-line double-precision reference
// on randomized configurations, whichever way the branch is chosen.
Outcome oracle_equivalence() {
    Gate g;
    UniformStream u(777);
    for (int trial = 0; trial < 100; trial++) {
        const Shape4 shape{1 + static_cast<int64_t>(u.next() * 2), 1 + static_cast<int64_t>(u.next() * 3),
                           8 + static_cast<int64_t>(u.next() * 9), 8 + static_cast<int64_t>(u.next() * 9)};
        GuidanceConfig cfg;
        cfg.lambda_low = u.next();
        cfg.lambda_high = 1.0 + u.next();
        cfg.sigma_split = std::vector<double>{0.5, 1.0, 2.0}[static_cast<size_t>(u.next() * 3)];
        cfg.alpha_rescale = u.next();
        cfg.scale = 1.0 + 7.0 * u.next();
        cfg.rescale_recenters = u.next() < 0.5;

        const Tensor4 y_c = random_tensor(shape, 9000 + 2 * static_cast<uint64_t>(trial), 1.5f);
        const Tensor4 y_u = random_tensor(shape, 9001 + 2 * static_cast<uint64_t>(trial));

        for (GuidanceMode mode : {GuidanceMode::CFGZeroFD, GuidanceMode::RescaleFDG}) {
            const auto [out, st] = zeresfdg_step(y_c, y_u, cfg, pinned_state(mode));
            g.expect(out.mode_used == mode,
                     [&](std::ostream& o) { o << "trial " << trial << ": pinned branch flipped"; });
            const Tensor4 ref = refimpl::guided_step_direct(y_c, y_u, cfg, mode);
            const double worst = max_abs_rel_diff(out.y, ref);
            g.expect(worst <= kTol, [&](std::ostream& o) {
                o << "trial " << trial << " " << mode_name(mode) << ": worst deviation " << worst;
            });
        }

        // Controller-selected branch: the reference picks its mode from its own
        // band energies, then both must land on the same answer.
        const auto [out, st] = zeresfdg_step(y_c, y_u, cfg, ControllerState{});
        const Tensor4 delta = add_scaled(y_c, y_u, -1.0f);
        const Tensor4 low = refimpl::blur_direct(delta, cfg.sigma_split);
        double r_sum = 0.0;
        const int64_t m = shape.per_sample();
        for (int64_t b = 0; b < shape.n; b++) {
            double el = 0.0;
            double eh = 0.0;
            for (int64_t i = b * m; i < (b + 1) * m; i++) {
                const double l = low.data[static_cast<size_t>(i)];
                const double h = delta.data[static_cast<size_t>(i)] - l;
                el += l * l;
                eh += h * h;
            }
            r_sum += el + eh > 0.0 ? eh / (el + eh) : 0.0;
        }
        refimpl::ControllerRef ctl;
        refimpl::controller_direct(ctl, r_sum / static_cast<double>(shape.n), cfg);
        g.expect(out.mode_used == ctl.mode, [&](std::ostream& o) {
            o << "trial " << trial << ": controller chose " << mode_name(out.mode_used)
              << ", reference " << mode_name(ctl.mode);
        });
        const Tensor4 ref = refimpl::guided_step_direct(y_c, y_u, cfg, ctl.mode);
        const double worst = max_abs_rel_diff(out.y, ref);
        g.expect(worst <= kTol, [&](std::ostream& o) {
            o << "trial " << trial << " controller-selected: worst deviation " << worst;
        });
    }
    return g.done();
}

}  // namespace

int main(int argc, char** argv) {
    const std::string repo_root = argc > 1 ? argv[1] : ".";

    struct Criterion {
        const char* name;
        std::function<Outcome()> check;
    };
    const std::vector<Criterion> criteria = {
        {"residual orthogonal to unconditional prediction", residual_orthogonality},
        {"band split partitions the delta exactly", band_partition},
        {"std rescale hits its target and alpha=0 is identity", rescale_contract},
        {"unit gains reduce to plain classifier-free guidance", cfg_reduction},
        {"hysteresis walk and EMA convergence", controller_contract},
        {"quantile clamp bounds, specials, and repeat stability", quantile_clamp_contract},
        {"micro detail identity, unsharp form, and ramp timing", micro_injection_contract},
        {"default run clean and golden outputs reproduce",
         [&] { return default_run_and_goldens(repo_root); }},
        {"stronger guidance lands closer to the conditional target", guidance_direction},
        {"guided step matches the straight-line reference", oracle_equivalence},
    };

    int failed = 0;
    for (size_t i = 0; i < criteria.size(); i++) {
        Outcome outcome;
        try {
            outcome = criteria[i].check();
        } catch (const std::exception& e) {
            outcome = {false, std::string("unexpected exception: ") + e.what()};
        }
        if (outcome.pass) {
            std::cout << "[PASS] criterion " << i + 1 << ": " << criteria[i].name << "\n";
        } else {
            std::cout << "[FAIL] criterion " << i + 1 << ": " << criteria[i].name << ": "
                      << outcome.detail << "\n";
            failed++;
        }
    }
    std::cout << (failed == 0 ? "acceptance: all criteria passed"
                              : "acceptance: " + std::to_string(failed) + " criterion(s) failed")
              << "\n";
    return failed > 99 ? 99 : failed;
}
