#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "flowinv/checkpoint.hpp"
#include "flowinv/diagnostics.hpp"
#include "flowinv/editing.hpp"
#include "flowinv/errors.hpp"
#include "flowinv/experiments.hpp"
#include "flowinv/format.hpp"

namespace flowinv::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Common {
    std::string ckpt;
    std::string out;
    std::optional<std::uint64_t> seed;
    double guidance = 5.0;
    std::size_t steps = 50;
    double nti_lr = 1e-4;
    std::size_t nti_inner = 10;
    bool nti_warm_start = false;

    GuidanceConfig guidance_config() const { return {guidance, steps}; }

    NTIConfig nti_config() const {
        NTIConfig c;
        c.inner_steps = nti_inner;
        c.lr = nti_lr;
        c.guidance = guidance;
        c.warm_start = nti_warm_start;
        return c;
    }

    std::uint64_t require_seed(const std::string& command) const {
        if (!seed) {
            throw UsageError(command + " needs --seed");
        }
        return *seed;
    }

    fs::path run_dir() const {
        fs::path dir(out);
        fs::create_directories(dir);
        return dir;
    }
};

void add_ckpt(CLI::App* cmd, Common& c) {
    cmd->add_option("--ckpt", c.ckpt, "Model checkpoint (model.finv)")->required();
}

void add_out(CLI::App* cmd, Common& c) {
    cmd->add_option("--out", c.out, "Run directory, created if absent")->required();
}

void add_seed(CLI::App* cmd, Common& c) { cmd->add_option("--seed", c.seed, "Root seed"); }

void add_guidance(CLI::App* cmd, Common& c) {
    cmd->add_option("--guidance,-w", c.guidance, "Guidance scale")->capture_default_str();
    cmd->add_option("--steps,-n", c.steps, "Euler steps")->capture_default_str();
}

void add_nti(CLI::App* cmd, Common& c) {
    cmd->add_option("--nti-lr", c.nti_lr, "Null-text Adam learning rate")->capture_default_str();
    cmd->add_option("--nti-inner", c.nti_inner, "Null-text inner iterations per step")
        ->capture_default_str();
    cmd->add_flag("--nti-warm-start", c.nti_warm_start,
                  "Start each step from the previous optimized embedding");
}

// Source latent: explicit coordinates or a draw from a token's mode.
struct SourceArgs {
    std::vector<double> latent;
    std::optional<TokenId> token;
};

void add_source(CLI::App* cmd, SourceArgs& s) {
    cmd->add_option("--source-latent", s.latent, "Source latent coordinates")->delimiter(',');
    cmd->add_option("--source-token", s.token, "Draw the source from this token's mode");
}

struct Source {
    Latent x0;
    std::optional<TokenId> token;
};

Source resolve_source(const SourceArgs& s, const DatasetSpec& spec, const Common& c,
                      const std::string& command) {
    if (s.latent.empty() == !s.token.has_value()) {
        throw UsageError(command + " needs exactly one of --source-latent and --source-token");
    }
    if (!s.latent.empty()) {
        if (s.latent.size() != spec.latent_dim) {
            throw UsageError("--source-latent has " + std::to_string(s.latent.size()) +
                             " coordinates, model expects " + std::to_string(spec.latent_dim));
        }
        return {Latent(s.latent), std::nullopt};
    }
    Rng rng = Rng(c.require_seed(command)).split(1);
    spec.anchor_of(*s.token);
    return {sample_mode(spec.mode_for_token(*s.token), rng), s.token};
}

json trajectory_summary(const Trajectory& t) {
    const Vector norms = t.velocity_norms();
    return {{"direction", to_string(t.direction)},
            {"steps", t.steps()},
            {"initial", t.initial().values},
            {"final", t.final_latent().values},
            {"velocity_norm_mean", finite_mean_std(norms).mean}};
}

json source_json(const Source& s) {
    json j = {{"latent", s.x0.values}};
    j["token"] = s.token ? json(*s.token) : json(nullptr);
    return j;
}

void print_written(std::ostream& out, const fs::path& dir, std::initializer_list<const char*> files) {
    for (const char* f : files) {
        out << "wrote " << (dir / f).string() << '\n';
    }
}

// ---- commands -------------------------------------------------------------

struct TrainArgs {
    std::size_t iterations = 20000;
    std::size_t batch_size = 64;
    double lr = 1e-3;
    std::size_t threads = 1;
    std::optional<std::uint64_t> data_seed;
    double p_uncond = 0.15;
    double radius = 3.0;
    double stddev = 0.25;
};

int run_train(const Common& c, const TrainArgs& a, std::ostream& out) {
    const std::uint64_t seed = c.require_seed("train");
    DefaultDatasetOptions opts;
    opts.p_uncond = a.p_uncond;
    opts.radius = a.radius;
    opts.stddev = a.stddev;
    const DatasetSpec spec = default_dataset_spec(a.data_seed.value_or(seed), opts);

    TrainConfig cfg;
    cfg.seed = seed;
    cfg.iterations = a.iterations;
    cfg.batch_size = a.batch_size;
    cfg.lr = a.lr;
    cfg.threads = a.threads;
    cfg.dims.latent_dim = spec.latent_dim;
    cfg.dims.vocab_size = spec.vocab_size();

    const TrainResult r = train(spec, cfg);
    const fs::path dir = c.run_dir();
    save_checkpoint(r.checkpoint, dir / "model.finv");
    write_loss_csv(r.loss_curve, dir / "loss.csv");
    const std::size_t window = std::min<std::size_t>(200, r.loss_curve.size());
    json summary = {{"seed", seed},
                    {"iterations", cfg.iterations},
                    {"parameter_count", r.checkpoint.field.parameter_count()},
                    {"zero_network_loss", zero_network_loss(spec)}};
    summary["final_loss"] = window > 0 ? json(tail_mean(r.loss_curve, window)) : json(nullptr);
    write_json(summary, dir / "train.json");
    print_written(out, dir, {"model.finv", "loss.csv", "train.json"});
    return kExitOk;
}

struct GenerateArgs {
    TokenId token = kEmptyToken;
    std::size_t count = 1;
};

int run_generate(const Common& c, const GenerateArgs& a, std::ostream& out) {
    const Rng root(c.require_seed("generate"));
    const Checkpoint ckpt = load_checkpoint(c.ckpt);
    const TokenRegistry registry = ckpt.dataset.registry();
    const Condition cond = embed_condition(ckpt.field, a.token, &registry);
    const GuidanceConfig g = c.guidance_config();

    std::vector<Trajectory> trajs;
    json samples = json::array();
    for (std::size_t i = 0; i < a.count; ++i) {
        Rng rng = root.split(2).split(i);
        Latent z1(ckpt.field.dims().latent_dim);
        for (double& x : z1.values) {
            x = rng.normal();
        }
        trajs.push_back(sample(ckpt.field, z1, cond, g));
        const Latent& x0 = trajs.back().final_latent();
        samples.push_back({{"noise", z1.values},
                           {"sample", x0.values},
                           {"nearest_mode", ckpt.dataset.nearest_mode(x0)}});
    }
    std::vector<NamedTrajectory> named;
    for (std::size_t i = 0; i < trajs.size(); ++i) {
        named.push_back({"sample_" + std::to_string(i), &trajs[i]});
    }
    const fs::path dir = c.run_dir();
    write_json({{"token", a.token}, {"kind", to_string(cond.kind)}, {"guidance", g.guidance},
                {"steps", g.steps}, {"samples", std::move(samples)}},
               dir / "generate.json");
    write_trajectory_csv(named, dir / "generate_trajectories.csv");
    print_written(out, dir, {"generate.json", "generate_trajectories.csv"});
    return kExitOk;
}

struct InvertArgs {
    SourceArgs source;
    TokenId cond_token = kEmptyToken;
    bool nti = false;
};

int run_invert(const Common& c, const InvertArgs& a, std::ostream& out) {
    const Checkpoint ckpt = load_checkpoint(c.ckpt);
    const Source src = resolve_source(a.source, ckpt.dataset, c, "invert");
    const TokenRegistry registry = ckpt.dataset.registry();
    const Condition cond = embed_condition(ckpt.field, a.cond_token, &registry);
    const Trajectory inv = invert(ckpt.field, src.x0, cond, c.guidance_config());

    const fs::path dir = c.run_dir();
    write_json({{"source", source_json(src)},
                {"cond_token", a.cond_token},
                {"kind", to_string(cond.kind)},
                {"noise_latent", inv.final_latent().values},
                {"inversion", trajectory_summary(inv)}},
               dir / "inversion.json");
    write_trajectory_csv({{"inversion", &inv}}, dir / "inversion_trajectory.csv");
    write_json(latent_dump({{"inversion", &inv}}), dir / "inversion_latents.json");
    print_written(out, dir, {"inversion.json", "inversion_trajectory.csv", "inversion_latents.json"});
    return kExitOk;
}

int run_reconstruct(const Common& c, const InvertArgs& a, std::ostream& out) {
    const Checkpoint ckpt = load_checkpoint(c.ckpt);
    const Source src = resolve_source(a.source, ckpt.dataset, c, "reconstruct");
    const TokenRegistry registry = ckpt.dataset.registry();
    const Condition cond = embed_condition(ckpt.field, a.cond_token, &registry);
    const GuidanceConfig g = c.guidance_config();

    const Trajectory inv = invert(ckpt.field, src.x0, cond, g);
    std::optional<NullSchedule> schedule;
    Trajectory rec;
    if (a.nti) {
        NtiResult r = nti_optimize(ckpt.field, inv, cond, c.nti_config());
        schedule = std::move(r.schedule);
        rec = std::move(r.trajectory);
    } else {
        rec = sample(ckpt.field, inv.final_latent(), cond, g);
    }

    const fs::path dir = c.run_dir();
    json j = {{"source", source_json(src)},
              {"cond_token", a.cond_token},
              {"kind", to_string(cond.kind)},
              {"use_nti", a.nti},
              {"noise_latent", inv.final_latent().values},
              {"reconstruction", rec.final_latent().values},
              {"l1", l1_reconstruction(rec.final_latent(), src.x0)},
              {"inversion", trajectory_summary(inv)},
              {"resample", trajectory_summary(rec)}};
    write_json(j, dir / "reconstruction.json");
    write_trajectory_csv({{"inversion", &inv}, {"reconstruction", &rec}},
                         dir / "reconstruction_trajectories.csv");
    write_json(latent_dump({{"inversion", &inv}, {"reconstruction", &rec}}),
               dir / "reconstruction_latents.json");
    print_written(out, dir,
                  {"reconstruction.json", "reconstruction_trajectories.csv", "reconstruction_latents.json"});
    if (schedule) {
        save_null_schedule(*schedule, dir / "null_schedule.finv");
        print_written(out, dir, {"null_schedule.finv"});
    }
    return kExitOk;
}

struct EditArgs {
    SourceArgs source;
    TokenId edit_token = kEmptyToken;
    bool nti = true;
};

int run_edit(const Common& c, const EditArgs& a, std::ostream& out) {
    if (a.edit_token == kEmptyToken) {
        throw UsageError("--edit-token 0 is the empty prompt; use reconstruct instead");
    }
    const Checkpoint ckpt = load_checkpoint(c.ckpt);
    const Source src = resolve_source(a.source, ckpt.dataset, c, "edit");

    EditRequest req;
    req.source = src.x0;
    req.edit_token = a.edit_token;
    req.use_nti = a.nti;
    req.guidance = c.guidance_config();
    req.nti = c.nti_config();
    req.seed = c.seed.value_or(0);
    const EditResult r = edit(ckpt.field, ckpt.dataset, req);

    const fs::path dir = c.run_dir();
    json j = edit_result_json(req, r);
    j["request"]["source_token"] = src.token ? json(*src.token) : json(nullptr);
    write_json(j, dir / "edit.json");
    const std::vector<NamedTrajectory> named = {{"inversion", &r.inversion},
                                                {"reconstruction", &r.reconstruction_trajectory},
                                                {"edit", &r.edit_trajectory}};
    write_trajectory_csv(named, dir / "edit_trajectories.csv");
    write_json(latent_dump(named), dir / "edit_latents.json");
    print_written(out, dir, {"edit.json", "edit_trajectories.csv", "edit_latents.json"});
    if (r.schedule) {
        save_null_schedule(*r.schedule, dir / "null_schedule.finv");
        print_written(out, dir, {"null_schedule.finv"});
    }
    return kExitOk;
}

struct SinkArgs {
    std::vector<std::string> anchors;
    std::size_t samples_per_token = 8;
};

int run_sink(const Common& c, const SinkArgs& a, std::ostream& out) {
    const std::uint64_t seed = c.require_seed("experiment sink");
    const Checkpoint ckpt = load_checkpoint(c.ckpt);
    const auto reports = run_sink_experiment(ckpt, a.anchors, a.samples_per_token, seed, c.guidance_config());
    const fs::path dir = c.run_dir();
    write_sink_csv(reports, dir / "sink_experiment.csv");
    print_written(out, dir, {"sink_experiment.csv"});
    return kExitOk;
}

struct PromptTypeArgs {
    std::size_t trials = 32;
    std::vector<std::string> kinds = {"true", "approximate", "empty"};
};

int run_prompt_type(const Common& c, const PromptTypeArgs& a, std::ostream& out) {
    const std::uint64_t seed = c.require_seed("experiment prompt-type");
    std::vector<ConditionKind> kinds;
    for (const auto& k : a.kinds) {
        const auto kind = condition_kind_from_string(k);
        if (kind == ConditionKind::Raw) {
            throw UsageError("--kinds does not accept raw");
        }
        kinds.push_back(kind);
    }
    const Checkpoint ckpt = load_checkpoint(c.ckpt);
    const GuidanceConfig g = c.guidance_config();
    const auto table = run_prompt_type_experiment(ckpt, a.trials, seed, g, kinds);
    const fs::path dir = c.run_dir();
    write_prompt_type_csv(table, dir / "prompt_type.csv");
    write_prompt_type_norms_csv(table, g.steps, dir / "prompt_type_norms.csv");
    print_written(out, dir, {"prompt_type.csv", "prompt_type_norms.csv"});
    return kExitOk;
}

struct ReconTableArgs {
    std::size_t trials = 64;
};

int run_recon_table(const Common& c, const ReconTableArgs& a, std::ostream& out) {
    const std::uint64_t seed = c.require_seed("experiment recon-table");
    const Checkpoint ckpt = load_checkpoint(c.ckpt);
    const auto table = run_reconstruction_table(ckpt, a.trials, seed, c.guidance_config(), c.nti_config());
    const fs::path dir = c.run_dir();
    write_recon_csv(table, dir / "recon_table.csv");
    print_written(out, dir, {"recon_table.csv"});
    return kExitOk;
}

int run_inspect(const std::string& path, std::ostream& out) {
    const Container raw = read_container(path);
    const std::string kind = raw.header.value("kind", "");
    json j = {{"path", path}, {"version", raw.version}, {"kind", kind}, {"value_count", raw.values.size()}};
    if (kind == "checkpoint") {
        const Checkpoint ckpt = load_checkpoint(path);
        j["dims"] = to_json(ckpt.field.dims());
        j["parameter_count"] = ckpt.field.parameter_count();
        j["train"] = to_json(ckpt.config);
        json anchors = json::array();
        for (const auto& a : ckpt.dataset.anchors) {
            anchors.push_back({{"name", a.name}, {"sink", a.sink}, {"tokens", a.tokens}});
        }
        j["anchors"] = std::move(anchors);
        j["ood_tokens"] = ckpt.dataset.ood_tokens;
    } else if (kind == "null_schedule") {
        const NullSchedule s = load_null_schedule(path);
        j["steps"] = s.steps();
        j["initial_loss_mean"] = finite_mean_std(s.initial_loss).mean;
        j["final_loss_mean"] = finite_mean_std(s.final_loss).mean;
    }
    out << j.dump(2) << '\n';
    return kExitOk;
}

std::string one_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

void error_line(std::ostream& err, const std::string& code, const std::string& what) {
    err << "error[" << code << "]: " << one_line(what) << '\n';
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Rectified-flow inversion, guidance and null-text optimization lab", "flowinv"};
    app.require_subcommand(1);
    app.set_config("--config", "", "TOML-style config file");

    Common common;
    TrainArgs train_args;
    GenerateArgs generate_args;
    InvertArgs invert_args;
    InvertArgs reconstruct_args;
    EditArgs edit_args;
    SinkArgs sink_args;
    PromptTypeArgs prompt_args;
    ReconTableArgs recon_args;
    std::string inspect_path;

    auto* train_cmd = app.add_subcommand("train", "Train a velocity field on the toy dataset");
    add_seed(train_cmd, common);
    add_out(train_cmd, common);
    train_cmd->add_option("--iterations", train_args.iterations, "Adam iterations")->capture_default_str();
    train_cmd->add_option("--batch-size", train_args.batch_size, "Minibatch size")->capture_default_str();
    train_cmd->add_option("--lr", train_args.lr, "Peak learning rate")->capture_default_str();
    train_cmd->add_option("--threads", train_args.threads, "Gradient worker threads")->capture_default_str();
    train_cmd->add_option("--data-seed", train_args.data_seed, "Dataset layout seed (default: --seed)");
    train_cmd->add_option("--p-uncond", train_args.p_uncond, "Empty-token dropout probability")
        ->capture_default_str();
    train_cmd->add_option("--radius", train_args.radius, "Mode sphere radius")->capture_default_str();
    train_cmd->add_option("--stddev", train_args.stddev, "Mode standard deviation")->capture_default_str();

    auto* generate_cmd = app.add_subcommand("generate", "Sample from noise under a token");
    add_ckpt(generate_cmd, common);
    add_seed(generate_cmd, common);
    add_out(generate_cmd, common);
    add_guidance(generate_cmd, common);
    generate_cmd->add_option("--token", generate_args.token, "Condition token")->capture_default_str();
    generate_cmd->add_option("--count", generate_args.count, "Number of samples")->capture_default_str();

    auto* invert_cmd = app.add_subcommand("invert", "Invert a latent to noise");
    add_ckpt(invert_cmd, common);
    add_seed(invert_cmd, common);
    add_out(invert_cmd, common);
    add_guidance(invert_cmd, common);
    add_source(invert_cmd, invert_args.source);
    invert_cmd->add_option("--cond-token", invert_args.cond_token, "Condition token")->capture_default_str();

    auto* reconstruct_cmd = app.add_subcommand("reconstruct", "Invert then resample a latent");
    add_ckpt(reconstruct_cmd, common);
    add_seed(reconstruct_cmd, common);
    add_out(reconstruct_cmd, common);
    add_guidance(reconstruct_cmd, common);
    add_nti(reconstruct_cmd, common);
    add_source(reconstruct_cmd, reconstruct_args.source);
    reconstruct_cmd->add_option("--cond-token", reconstruct_args.cond_token, "Condition token")
        ->capture_default_str();
    reconstruct_cmd->add_flag("--nti,!--no-nti", reconstruct_args.nti, "Null-text optimization (default: off)");

    auto* edit_cmd = app.add_subcommand("edit", "Invert with the empty prompt, resample with an edit token");
    add_ckpt(edit_cmd, common);
    add_seed(edit_cmd, common);
    add_out(edit_cmd, common);
    add_guidance(edit_cmd, common);
    add_nti(edit_cmd, common);
    add_source(edit_cmd, edit_args.source);
    edit_cmd->add_option("--edit-token", edit_args.edit_token, "Edit token (non-zero)")->required();
    edit_cmd->add_flag("--nti,!--no-nti", edit_args.nti, "Null-text optimization (default: on)");

    auto* experiment_cmd = app.add_subcommand("experiment", "Run a diagnostic experiment");
    experiment_cmd->require_subcommand(1);

    auto* sink_cmd = experiment_cmd->add_subcommand("sink", "Diversity ratio per anchor");
    add_ckpt(sink_cmd, common);
    add_seed(sink_cmd, common);
    add_out(sink_cmd, common);
    add_guidance(sink_cmd, common);
    sink_cmd->add_option("--anchors", sink_args.anchors, "Anchor names (default: all)")->delimiter(',');
    sink_cmd->add_option("--samples-per-token", sink_args.samples_per_token, "Samples per token")
        ->capture_default_str();

    auto* prompt_cmd = experiment_cmd->add_subcommand("prompt-type", "Reconstruction and norms per prompt kind");
    add_ckpt(prompt_cmd, common);
    add_seed(prompt_cmd, common);
    add_out(prompt_cmd, common);
    add_guidance(prompt_cmd, common);
    prompt_cmd->add_option("--trials", prompt_args.trials, "Trials")->capture_default_str();
    prompt_cmd->add_option("--kinds", prompt_args.kinds, "Condition kinds (true,approximate,empty,ood)")
        ->delimiter(',')
        ->capture_default_str();

    auto* recon_cmd = experiment_cmd->add_subcommand("recon-table", "Euler vs null-text reconstruction table");
    add_ckpt(recon_cmd, common);
    add_seed(recon_cmd, common);
    add_out(recon_cmd, common);
    add_guidance(recon_cmd, common);
    add_nti(recon_cmd, common);
    recon_cmd->add_option("--trials", recon_args.trials, "Trials")->capture_default_str();

    auto* inspect_cmd = app.add_subcommand("inspect", "Describe a checkpoint or null schedule file");
    inspect_cmd->add_option("file", inspect_path, "Container file")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        CLI::App* failing = &app;
        for (CLI::App* sub = &app; sub != nullptr;) {
            failing = sub;
            const auto subs = sub->get_subcommands();
            sub = subs.empty() ? nullptr : subs.front();
        }
        err << failing->help();
        error_line(err, "usage", e.what());
        return kExitUsage;
    }

    try {
        if (*train_cmd) {
            return run_train(common, train_args, out);
        }
        if (*generate_cmd) {
            return run_generate(common, generate_args, out);
        }
        if (*invert_cmd) {
            return run_invert(common, invert_args, out);
        }
        if (*reconstruct_cmd) {
            return run_reconstruct(common, reconstruct_args, out);
        }
        if (*edit_cmd) {
            return run_edit(common, edit_args, out);
        }
        if (*sink_cmd) {
            return run_sink(common, sink_args, out);
        }
        if (*prompt_cmd) {
            return run_prompt_type(common, prompt_args, out);
        }
        if (*recon_cmd) {
            return run_recon_table(common, recon_args, out);
        }
        if (*inspect_cmd) {
            return run_inspect(inspect_path, out);
        }
    } catch (const UsageError& e) {
        error_line(err, "usage", e.what());
        return kExitUsage;
    } catch (const ConfigError& e) {
        error_line(err, e.code(), e.what());
        return kExitUsage;
    } catch (const Error& e) {
        error_line(err, e.code(), e.what());
        return kExitRuntime;
    } catch (const fs::filesystem_error& e) {
        error_line(err, "io", e.what());
        return kExitRuntime;
    } catch (const std::exception& e) {
        error_line(err, "internal", e.what());
        return kExitRuntime;
    }
    error_line(err, "usage", "no command given");
    return kExitUsage;
}

}  // namespace flowinv::cli
