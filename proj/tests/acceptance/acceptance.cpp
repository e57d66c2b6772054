// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Usage: flowinv_acceptance [run-dir]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "flowinv/autodiff.hpp"
#include "flowinv/checkpoint.hpp"
#include "flowinv/diagnostics.hpp"
#include "flowinv/editing.hpp"
#include "flowinv/experiments.hpp"
#include "flowinv/format.hpp"

using namespace flowinv;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

int failures = 0;

void report(int id, bool pass, const std::string& name, const std::string& detail) {
    std::printf("%s [%d] %s: %s\n", pass ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass) {
        ++failures;
    }
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), f, args...);
    return buf;
}

Latent gaussian(Rng& rng, std::size_t d, double scale = 1.0) {
    Latent z(d);
    for (double& x : z.values) {
        x = scale * rng.normal();
    }
    return z;
}

Vector gaussian_vec(Rng& rng, std::size_t n) { return gaussian(rng, n).values; }

// ---- 1: embedding gradient vs central differences ----------------------

void criterion_gradients(const Checkpoint& trained) {
    const auto start = Clock::now();
    Rng rng(101);
    const double h = 1e-5;
    const std::size_t configs = 120;
    double worst = 0.0;
    std::size_t bad = 0;
    for (std::size_t trial = 0; trial < configs; ++trial) {
        VelocityField field = trained.field;
        if (trial % 2 == 1) {
            FieldDims dims = trained.field.dims();
            const auto base = init_field(dims, rng.next_u64());
            Vector p(base.parameters().begin(), base.parameters().end());
            for (const auto& l : base.layers()) {
                for (std::size_t o = 0; o < l.out; ++o) {
                    p[l.bias_offset + o] = 0.3 * rng.normal();
                }
            }
            field = VelocityField(dims, p);
        }
        const std::size_t d = field.dims().latent_dim;
        const Latent z = gaussian(rng, d, 1.5);
        const double t = 0.02 + 0.96 * rng.uniform();
        StepLossSpec spec;
        spec.t_next = t - 0.02;
        spec.guidance = 5.0;
        const auto row = field.embedding_row(static_cast<TokenId>(1 + rng.below(field.dims().vocab_size - 1)));
        spec.cond_embedding.assign(row.begin(), row.end());
        spec.target = gaussian(rng, d, 0.5);
        for (std::size_t k = 0; k < d; ++k) {
            spec.target[k] += z[k];
        }
        const Vector e_u = gaussian_vec(rng, field.dims().embed_dim);

        const auto analytic = grad_loss_wrt_embedding(field, z, t, e_u, spec).gradient;
        Vector numeric(e_u.size());
        for (std::size_t i = 0; i < e_u.size(); ++i) {
            Vector ep = e_u, em = e_u;
            ep[i] += h;
            em[i] -= h;
            numeric[i] = (grad_loss_wrt_embedding(field, z, t, ep, spec).loss -
                          grad_loss_wrt_embedding(field, z, t, em, spec).loss) /
                         (2.0 * h);
        }
        double diff = 0.0, na = 0.0, nb = 0.0;
        for (std::size_t i = 0; i < numeric.size(); ++i) {
            diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
            na += analytic[i] * analytic[i];
            nb += numeric[i] * numeric[i];
        }
        const double rel = std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-300});
        worst = std::max(worst, rel);
        if (!(rel < 1e-4)) {
            ++bad;
        }
    }
    const double elapsed = seconds_since(start);
    report(1, bad == 0 && elapsed < 10.0, "gradient correctness",
           fmt("%zu configs, max relative error %.2e (< 1e-4), %.2f s (< 10 s)", configs, worst, elapsed));
}

// ---- 2: guidance identities ---------------------------------------------

void criterion_cfg(const Checkpoint& trained) {
    const auto& f = trained.field;
    const auto null_row = f.embedding_row(kEmptyToken);
    Rng rng(202);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const Latent z = gaussian(rng, f.dims().latent_dim, 2.0);
        const double t = rng.uniform();
        const auto cond = embed_condition(f, static_cast<TokenId>(1 + rng.below(f.dims().vocab_size - 1)));
        const auto empty = embed_condition(f, kEmptyToken);
        const Latent vu = eval_velocity(f, z, t, null_row);
        const Latent vc = eval_velocity(f, z, t, cond);
        const Latent g1 = guided_velocity(f, z, t, cond, null_row, 1.0);
        const Latent g0 = guided_velocity(f, z, t, cond, null_row, 0.0);
        const double w = 20.0 * rng.uniform() - 5.0;
        const Latent ge = guided_velocity(f, z, t, empty, null_row, w);
        const Latent ge5 = guided_velocity(f, z, t, empty, null_row, 5.0);
        for (std::size_t k = 0; k < z.size(); ++k) {
            worst = std::max({worst, std::abs(g1[k] - vc[k]), std::abs(g0[k] - vu[k]),
                              std::abs(ge[k] - ge5[k]), std::abs(ge[k] - vu[k])});
        }
    }
    report(2, worst < 1e-12, "CFG identities",
           fmt("200 inputs, max deviation %.2e (< 1e-12)", worst));
}

// ---- 3: constant-field oracle ---------------------------------------------

VelocityField constant_field(const Vector& c) {
    FieldDims dims;
    dims.latent_dim = c.size();
    dims.vocab_size = 4;
    const VelocityField base = init_field(dims, 17, {.zero_final_layer = true});
    Vector p(base.parameters().begin(), base.parameters().end());
    const auto& last = base.layers().back();
    for (std::size_t k = 0; k < c.size(); ++k) {
        p[last.bias_offset + k] = c[k];
    }
    return VelocityField(dims, p);
}

void criterion_constant_field() {
    Rng rng(303);
    bool bitwise = true;
    double drift = 0.0;
    double random_roundtrip = 0.0;
    std::size_t cases = 0;
    for (std::size_t n : {1u, 7u, 50u}) {
        for (int trial = 0; trial < 20; ++trial) {
            // Exactly representable iterates: power-of-two c from z0 = 0 gives
            // z_i = t_i * c on any grid (grid differences are exact). At N = 1
            // any small dyadic z0 stays exact as well.
            Vector c(8);
            Latent z0(8);
            for (std::size_t k = 0; k < 8; ++k) {
                c[k] = std::ldexp(rng.below(2) ? 1.0 : -1.0, static_cast<int>(rng.below(6)) - 3);
                if (n == 1) {
                    z0[k] = std::ldexp(static_cast<double>(static_cast<int>(rng.below(64)) - 32), -4);
                }
            }
            const auto f = constant_field(c);
            const GuidanceConfig cfg{5.0, n};
            const auto fwd = invert(f, z0, embed_condition(f, 1), cfg);
            const auto bwd = sample(f, fwd.final_latent(), embed_condition(f, 1), cfg);
            bitwise = bitwise && bwd.final_latent() == z0;
            for (std::size_t k = 0; k < 8; ++k) {
                bitwise = bitwise && fwd.final_latent()[k] == z0[k] + c[k];
            }

            // arbitrary reals
            const Vector cr = gaussian_vec(rng, 8);
            const Latent zr = gaussian(rng, 8);
            const auto fr = constant_field(cr);
            const auto fwd_r = invert(fr, zr, embed_condition(fr, 2), cfg);
            const auto bwd_r = sample(fr, fwd_r.final_latent(), embed_condition(fr, 2), cfg);
            for (std::size_t k = 0; k < 8; ++k) {
                drift = std::max(drift, std::abs(fwd_r.final_latent()[k] - (zr[k] + cr[k])));
                random_roundtrip = std::max(random_roundtrip, std::abs(bwd_r.final_latent()[k] - zr[k]));
            }
            cases += 2;
        }
    }
    report(3, bitwise && drift < 1e-12 && random_roundtrip < 1e-12, "constant-field oracle",
           fmt("N in {1,7,50}, %zu cases; z1 = z0 + c and round trip bitwise on exact inputs: %s; "
               "random inputs |z1-(z0+c)| max %.1e, round trip max %.1e",
               cases, bitwise ? "yes" : "no", drift, random_roundtrip));
}

// ---- 4: Euler convergence order ------------------------------------------

void criterion_convergence(const Checkpoint& trained) {
    const auto start = Clock::now();
    const auto& f = trained.field;
    const auto empty = embed_condition(f, kEmptyToken);
    const std::vector<std::size_t> ns = {25, 50, 100, 200};
    std::vector<Latent> sources;
    Rng rng(404);
    for (int i = 0; i < 16; ++i) {
        sources.push_back(draw_trial_source(trained.dataset, rng).x0);
    }
    std::vector<double> xs, ys;
    std::string table;
    for (std::size_t n : ns) {
        const GuidanceConfig cfg{5.0, n};
        double acc = 0.0;
        for (const auto& x0 : sources) {
            const auto fwd = invert(f, x0, empty, cfg);
            const auto bwd = sample(f, fwd.final_latent(), empty, cfg);
            acc += l1_reconstruction(bwd.final_latent(), x0);
        }
        const double l1 = acc / static_cast<double>(sources.size());
        xs.push_back(std::log(static_cast<double>(n)));
        ys.push_back(std::log(l1));
        table += fmt("%sN=%zu:%.2e", table.empty() ? "" : " ", n, l1);
    }
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / ys.size();
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    const double slope = sxy / sxx;
    const double elapsed = seconds_since(start);
    report(4, std::abs(slope + 1.0) <= 0.3 && elapsed < 30.0, "Euler convergence order",
           fmt("slope %.3f (-1 +/- 0.3), %s, %.2f s", slope, table.c_str(), elapsed));
}

// ---- 5: NTI fixpoint --------------------------------------------------------

struct FixpointStats {
    double max_initial_loss = 0.0;
    double max_drift = 0.0;
};

FixpointStats nti_fixpoint(const VelocityField& f, const Latent& x0) {
    const auto empty = embed_condition(f, kEmptyToken);
    const auto fwd = invert(f, x0, empty, GuidanceConfig{});
    const auto r = nti_optimize(f, fwd, empty, NTIConfig{});
    const auto row = f.embedding_row(kEmptyToken);
    FixpointStats s;
    for (std::size_t i = 0; i < r.schedule.steps(); ++i) {
        s.max_initial_loss = std::max(s.max_initial_loss, r.schedule.initial_loss[i]);
        for (std::size_t k = 0; k < row.size(); ++k) {
            s.max_drift = std::max(s.max_drift, std::abs(r.schedule.embeddings[i][k] - row[k]));
        }
    }
    return s;
}

void criterion_nti_fixpoint(const Checkpoint& trained) {
    // velocity depends on the embedding only: z and t input weights zeroed
    FieldDims dims = trained.field.dims();
    const auto base = init_field(dims, 505);
    Vector p(base.parameters().begin(), base.parameters().end());
    const auto& first = base.layers().front();
    for (std::size_t o = 0; o < first.out; ++o) {
        for (std::size_t i = 0; i <= dims.latent_dim; ++i) {
            p[first.weight_offset + o * first.in + i] = 0.0;
        }
    }
    const VelocityField f(dims, p);
    Rng rng(505);
    FixpointStats worst;
    for (int trial = 0; trial < 8; ++trial) {
        const auto s = nti_fixpoint(f, gaussian(rng, dims.latent_dim, 2.0));
        worst.max_initial_loss = std::max(worst.max_initial_loss, s.max_initial_loss);
        worst.max_drift = std::max(worst.max_drift, s.max_drift);
    }
    const auto info = nti_fixpoint(trained.field, draw_trial_source(trained.dataset, rng).x0);
    report(5, worst.max_initial_loss < 1e-10 && worst.max_drift < 1e-8, "NTI fixpoint",
           fmt("embedding-only field, 8 trials: max initial step loss %.1e (< 1e-10), max drift %.1e "
               "(< 1e-8); trained field for reference: %.1e, %.1e",
               worst.max_initial_loss, worst.max_drift, info.max_initial_loss, info.max_drift));
}

// ---- 6: reconstruction table ordering ----------------------------------------

void criterion_recon_table(const Checkpoint& trained, double train_seconds, const fs::path& dir) {
    const auto start = Clock::now();
    const auto table = run_reconstruction_table(trained, 64, 606);
    write_recon_csv(table, dir / "recon_table.csv");
    const double ea = table.rows[0].l1_mean;
    const double na = table.rows[1].l1_mean;
    const double ee = table.rows[2].l1_mean;
    const double ne = table.rows[3].l1_mean;
    const bool ordering = ea > na && na > ee;
    const bool gap = ee * 3.0 <= ea;
    const bool parity = std::max(ee, ne) <= 2.0 * std::min(ee, ne);
    std::size_t failed = 0;
    for (const auto& r : table.rows) {
        failed += r.failures;
    }
    const double total = train_seconds + seconds_since(start);
    report(6, ordering && gap && parity && failed == 0 && total < 300.0, "reconstruction table ordering",
           fmt("64 trials: euler_approx %.4f > nti_approx %.4f > euler_empty %.4f (%s); "
               "euler_approx/euler_empty %.1fx (>= 3); nti_empty %.4f, ratio %.2f (<= 2); %.1f s incl. training",
               ea, na, ee, ordering ? "ok" : "violated", ea / ee, ne, std::max(ee, ne) / std::min(ee, ne), total));
}

// ---- 7: OOD velocity norms --------------------------------------------------

void criterion_ood_norms(const Checkpoint& trained, const fs::path& dir) {
    const GuidanceConfig cfg;
    const std::vector<ConditionKind> kinds = {ConditionKind::True, ConditionKind::Approximate,
                                              ConditionKind::Empty, ConditionKind::Ood};
    const auto table = run_prompt_type_experiment(trained, 32, 707, cfg, kinds);
    write_prompt_type_csv(table, dir / "prompt_type.csv");
    write_prompt_type_norms_csv(table, cfg.steps, dir / "prompt_type_norms.csv");
    double empty = 0.0, ood = 0.0;
    for (const auto& row : table.rows) {
        if (row.kind == ConditionKind::Empty) {
            empty = row.norm_mean;
        } else if (row.kind == ConditionKind::Ood) {
            ood = row.norm_mean;
        }
    }
    report(7, ood >= 1.2 * empty, "OOD velocity-norm direction",
           fmt("32 trials: OOD mean norm %.3f vs Empty %.3f, ratio %.2f (>= 1.2)", ood, empty, ood / empty));
}

// ---- 8: sink-trap diversity ---------------------------------------------------

void criterion_sink(const Checkpoint& trained, const fs::path& dir) {
    const auto reports = run_sink_experiment(trained, {}, 8, 808);
    write_sink_csv(reports, dir / "sink_experiment.csv");
    double max_sink = -1.0, min_diverse = 1e300;
    bool all_present = true;
    std::string detail;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& r = reports[i];
        if (!r.ratio) {
            all_present = false;
            continue;
        }
        const bool sink = trained.dataset.anchors[i].sink;
        if (sink) {
            max_sink = std::max(max_sink, *r.ratio);
        } else {
            min_diverse = std::min(min_diverse, *r.ratio);
        }
        detail += fmt("%s%s R=%.3f", detail.empty() ? "" : ", ", r.anchor.c_str(), *r.ratio);
    }
    report(8, all_present && max_sink >= 0.0 && max_sink < 0.5 * min_diverse, "sink-trap diversity",
           fmt("8 samples per token: %s; max sink %.3f < 0.5 x min diverse %.3f", detail.c_str(), max_sink,
               min_diverse));
}

// ---- 9: edit retargeting --------------------------------------------------------

void criterion_edits(const Checkpoint& trained) {
    const auto& spec = trained.dataset;
    std::vector<const Anchor*> diverse;
    for (const auto& a : spec.anchors) {
        if (!a.sink) {
            diverse.push_back(&a);
        }
    }
    std::size_t retargeted = 0, nti_better = 0, requests = 0;
    for (std::size_t i = 0; i < 16; ++i) {
        const Anchor& anchor = *diverse[i % diverse.size()];
        const std::size_t k = (i / diverse.size()) % anchor.tokens.size();
        const TokenId src = anchor.tokens[k];
        TokenId dst = anchor.tokens[(k + anchor.tokens.size() / 2) % anchor.tokens.size()];
        if (spec.global_mode_index(dst) == spec.global_mode_index(src)) {
            dst = approximate_token(spec, src);
        }
        Rng rng = Rng(909).split(i);
        EditRequest req;
        req.source = sample_mode(spec.mode_for_token(src), rng);
        req.edit_token = dst;
        req.seed = 909;
        req.use_nti = true;
        const auto with_nti = edit(trained.field, spec, req);
        req.use_nti = false;
        const auto plain = edit(trained.field, spec, req);
        ++requests;
        if (with_nti.target_mode && with_nti.edited_mode == *with_nti.target_mode) {
            ++retargeted;
        }
        if (with_nti.reconstruction_l1 <= plain.reconstruction_l1) {
            ++nti_better;
        }
    }
    report(9, retargeted >= 14 && nti_better >= 12, "edit retargeting",
           fmt("%zu/%zu edits classify to the target mode (>= 14); NTI reconstruction L1 <= plain in "
               "%zu/%zu (>= 12)",
               retargeted, requests, nti_better, requests));
}

// ---- 10: CLI determinism ----------------------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

int run_cli(const std::vector<std::string>& args, std::string& errors) {
    std::ostringstream out, err;
    const int code = cli::dispatch(args, out, err);
    errors += err.str();
    return code;
}

void criterion_cli_determinism(const fs::path& dir) {
    const auto start = Clock::now();
    fs::remove_all(dir);
    std::string errors;
    bool ok = true;
    std::size_t compared = 0;
    std::vector<std::string> mismatched;

    const std::vector<std::pair<std::string, std::vector<std::string>>> commands = {
        {"train", {"train", "--seed", "7", "--iterations", "600"}},
        {"invert", {"invert", "--ckpt", "@model", "--seed", "3", "--source-token", "5"}},
        {"reconstruct", {"reconstruct", "--ckpt", "@model", "--seed", "3", "--source-token", "5", "--nti"}},
        {"edit", {"edit", "--ckpt", "@model", "--seed", "3", "--source-token", "5", "--edit-token", "9"}},
        {"generate", {"generate", "--ckpt", "@model", "--seed", "3", "--token", "12", "--count", "4"}},
        {"sink", {"experiment", "sink", "--ckpt", "@model", "--seed", "3", "--samples-per-token", "2"}},
        {"prompt-type", {"experiment", "prompt-type", "--ckpt", "@model", "--seed", "3", "--trials", "4",
                         "--kinds", "true,approximate,empty,ood"}},
        {"recon-table", {"experiment", "recon-table", "--ckpt", "@model", "--seed", "3", "--trials", "4"}},
    };
    const fs::path model = dir / "run1" / "train" / "model.finv";
    for (const auto& [name, base] : commands) {
        for (const char* run : {"run1", "run2"}) {
            std::vector<std::string> args;
            for (const auto& a : base) {
                args.push_back(a == "@model" ? model.string() : a);
            }
            args.push_back("--out");
            args.push_back((dir / run / name).string());
            if (run_cli(args, errors) != 0) {
                ok = false;
                mismatched.push_back(name + " (exit status)");
            }
        }
        for (const auto& entry : fs::directory_iterator(dir / "run1" / name)) {
            const fs::path other = dir / "run2" / name / entry.path().filename();
            ++compared;
            if (!fs::exists(other) || slurp(entry.path()) != slurp(other)) {
                ok = false;
                mismatched.push_back(name + "/" + entry.path().filename().string());
            }
        }
    }
    std::string detail = fmt("%zu files compared across two runs of 8 commands, %.1f s", compared,
                             seconds_since(start));
    for (const auto& m : mismatched) {
        detail += "; differs: " + m;
    }
    if (!errors.empty()) {
        detail += "; stderr: " + errors;
    }
    report(10, ok && compared > 0, "CLI determinism", detail);
}

}  // namespace

int main(int argc, char** argv) {
    const fs::path dir = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_run");
    fs::create_directories(dir);

    const auto start = Clock::now();
    const DatasetSpec spec = default_dataset_spec(1);
    TrainConfig cfg;
    cfg.seed = 1;
    cfg.dims.vocab_size = spec.vocab_size();
    const TrainResult trained = train(spec, cfg);
    const double train_seconds = seconds_since(start);
    save_checkpoint(trained.checkpoint, dir / "model.finv");
    write_loss_csv(trained.loss_curve, dir / "loss.csv");
    std::printf("model: %zu iterations in %.1f s, final loss %.4f (zero network %.4f)\n", cfg.iterations,
                train_seconds, tail_mean(trained.loss_curve, 200), zero_network_loss(spec));

    const Checkpoint& ckpt = trained.checkpoint;
    criterion_gradients(ckpt);
    criterion_cfg(ckpt);
    criterion_constant_field();
    criterion_convergence(ckpt);
    criterion_nti_fixpoint(ckpt);
    criterion_recon_table(ckpt, train_seconds, dir);
    criterion_ood_norms(ckpt, dir);
    criterion_sink(ckpt, dir);
    criterion_edits(ckpt);
    criterion_cli_determinism(dir / "cli");

    std::printf("%s: %d of 10 criteria failed, %.1f s total\n", failures == 0 ? "OK" : "FAILED", failures,
                seconds_since(start));
    return failures == 0 ? 0 : 1;
}
