#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "flowinv/checkpoint.hpp"
#include "flowinv/diagnostics.hpp"
#include "flowinv/editing.hpp"
#include "flowinv/errors.hpp"
#include "flowinv/experiments.hpp"

namespace py = pybind11;
using namespace flowinv;

namespace {

Latent to_latent(const std::vector<double>& v) { return Latent(v); }

Condition condition_for(const Checkpoint& ckpt, TokenId token) {
    const TokenRegistry registry = ckpt.dataset.registry();
    return embed_condition(ckpt.field, token, &registry);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Rectified-flow inversion, guidance and null-text optimization";

    auto base = py::register_exception<Error>(m, "FlowinvError", PyExc_RuntimeError);
    py::register_exception<RangeError>(m, "RangeError", base);
    py::register_exception<ShapeError>(m, "ShapeError", base);
    py::register_exception<ConfigError>(m, "ConfigError", base);
    py::register_exception<NumericError>(m, "NumericError", base);
    py::register_exception<MetricError>(m, "MetricError", base);
    py::register_exception<IoError>(m, "IoError", base);
    py::register_exception<LatentExplosion>(m, "LatentExplosion", base);
    py::register_exception<TrainingError>(m, "TrainingError", base);
    py::register_exception<NtiError>(m, "NtiError", base);
    auto ckpt_error = py::register_exception<CheckpointError>(m, "CheckpointError", base);
    py::register_exception<CorruptFileError>(m, "CorruptFileError", ckpt_error);
    py::register_exception<VersionError>(m, "VersionError", ckpt_error);

    py::enum_<ConditionKind>(m, "ConditionKind")
        .value("EMPTY", ConditionKind::Empty)
        .value("TRUE", ConditionKind::True)
        .value("APPROXIMATE", ConditionKind::Approximate)
        .value("OOD", ConditionKind::Ood)
        .value("RAW", ConditionKind::Raw);

    py::class_<FieldDims>(m, "FieldDims")
        .def(py::init<>())
        .def_readwrite("latent_dim", &FieldDims::latent_dim)
        .def_readwrite("embed_dim", &FieldDims::embed_dim)
        .def_readwrite("vocab_size", &FieldDims::vocab_size)
        .def_readwrite("hidden", &FieldDims::hidden);

    py::class_<VelocityField>(m, "VelocityField")
        .def(py::init([](const FieldDims& dims, const std::vector<double>& params) {
                 return VelocityField(dims, params);
             }),
             py::arg("dims"), py::arg("parameters"))
        .def_property_readonly("dims", &VelocityField::dims)
        .def_property_readonly("parameter_count", &VelocityField::parameter_count)
        .def_property_readonly("parameters",
                               [](const VelocityField& f) {
                                   const auto p = f.parameters();
                                   return std::vector<double>(p.begin(), p.end());
                               })
        .def("embedding_row",
             [](const VelocityField& f, TokenId token) {
                 const auto row = f.embedding_row(token);
                 return std::vector<double>(row.begin(), row.end());
             })
        .def("velocity",
             [](const VelocityField& f, const std::vector<double>& z, double t, const std::vector<double>& emb) {
                 return eval_velocity(f, to_latent(z), t, emb).values;
             },
             py::arg("z"), py::arg("t"), py::arg("embedding"));

    m.def("init_field", [](const FieldDims& dims, std::uint64_t seed) { return init_field(dims, seed); },
          py::arg("dims"), py::arg("seed"));

    py::class_<DatasetSpec>(m, "DatasetSpec")
        .def_readonly("latent_dim", &DatasetSpec::latent_dim)
        .def_readonly("ood_tokens", &DatasetSpec::ood_tokens)
        .def_readonly("p_uncond", &DatasetSpec::p_uncond)
        .def_property_readonly("vocab_size", &DatasetSpec::vocab_size)
        .def_property_readonly("anchor_names",
                               [](const DatasetSpec& s) {
                                   std::vector<std::string> names;
                                   for (const auto& a : s.anchors) {
                                       names.push_back(a.name);
                                   }
                                   return names;
                               })
        .def("anchor_tokens", [](const DatasetSpec& s, std::size_t i) { return s.anchors.at(i).tokens; })
        .def("is_sink", [](const DatasetSpec& s, std::size_t i) { return s.anchors.at(i).sink; })
        .def("mode_mean", [](const DatasetSpec& s, TokenId t) { return s.mode_for_token(t).mean; })
        .def("mode_index", &DatasetSpec::global_mode_index)
        .def("nearest_mode",
             [](const DatasetSpec& s, const std::vector<double>& x) { return s.nearest_mode(to_latent(x)); })
        .def("kind_of", [](const DatasetSpec& s, TokenId t) { return s.registry().kind_of(t); })
        .def("approximate_token", [](const DatasetSpec& s, TokenId t) { return approximate_token(s, t); })
        .def("sample_mode",
             [](const DatasetSpec& s, TokenId t, std::uint64_t seed) {
                 Rng rng(seed);
                 return sample_mode(s.mode_for_token(t), rng).values;
             },
             py::arg("token"), py::arg("seed"));

    m.def("default_dataset_spec", [](std::uint64_t seed) { return default_dataset_spec(seed); },
          py::arg("seed"));

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("batch_size", &TrainConfig::batch_size)
        .def_readwrite("iterations", &TrainConfig::iterations)
        .def_readwrite("lr", &TrainConfig::lr)
        .def_readwrite("lr_floor", &TrainConfig::lr_floor)
        .def_readwrite("seed", &TrainConfig::seed)
        .def_readwrite("dims", &TrainConfig::dims)
        .def_readwrite("threads", &TrainConfig::threads);

    py::class_<Checkpoint>(m, "Checkpoint")
        .def_readonly("field", &Checkpoint::field)
        .def_readonly("dataset", &Checkpoint::dataset)
        .def_readonly("config", &Checkpoint::config)
        .def_readonly("version", &Checkpoint::version)
        .def("__eq__", [](const Checkpoint& a, const Checkpoint& b) { return a == b; });

    m.def("train",
          [](const DatasetSpec& spec, TrainConfig cfg) {
              if (cfg.dims.vocab_size < spec.vocab_size()) {
                  cfg.dims.vocab_size = spec.vocab_size();
              }
              TrainResult r;
              {
                  py::gil_scoped_release release;
                  r = train(spec, cfg);
              }
              return py::make_tuple(std::move(r.checkpoint), std::move(r.loss_curve));
          },
          py::arg("spec"), py::arg("config"),
          "Returns (checkpoint, per-iteration loss curve).");
    m.def("zero_network_loss", &zero_network_loss);
    m.def("save_checkpoint", &save_checkpoint, py::arg("checkpoint"), py::arg("path"));
    m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

    py::class_<GuidanceConfig>(m, "GuidanceConfig")
        .def(py::init([](double guidance, std::size_t steps) { return GuidanceConfig{guidance, steps}; }),
             py::arg("guidance") = 5.0, py::arg("steps") = 50)
        .def_readwrite("guidance", &GuidanceConfig::guidance)
        .def_readwrite("steps", &GuidanceConfig::steps);

    py::class_<NTIConfig>(m, "NTIConfig")
        .def(py::init([](std::size_t inner_steps, double lr, double guidance, bool warm_start) {
                 return NTIConfig{inner_steps, lr, guidance, warm_start};
             }),
             py::arg("inner_steps") = 10, py::arg("lr") = 1e-4, py::arg("guidance") = 5.0,
             py::arg("warm_start") = false)
        .def_readwrite("inner_steps", &NTIConfig::inner_steps)
        .def_readwrite("lr", &NTIConfig::lr)
        .def_readwrite("guidance", &NTIConfig::guidance)
        .def_readwrite("warm_start", &NTIConfig::warm_start);

    py::class_<Trajectory>(m, "Trajectory")
        .def_property_readonly("direction",
                               [](const Trajectory& t) { return std::string(to_string(t.direction)); })
        .def_property_readonly("steps", &Trajectory::steps)
        .def_property_readonly("times",
                               [](const Trajectory& t) {
                                   std::vector<double> out;
                                   for (const auto& r : t.records) {
                                       out.push_back(r.t);
                                   }
                                   return out;
                               })
        .def_property_readonly("latents",
                               [](const Trajectory& t) {
                                   std::vector<Vector> out;
                                   for (const auto& r : t.records) {
                                       out.push_back(r.z.values);
                                   }
                                   return out;
                               })
        .def_property_readonly("velocity_norms", &Trajectory::velocity_norms)
        .def_property_readonly("final", [](const Trajectory& t) { return t.final_latent().values; });

    py::class_<NullSchedule>(m, "NullSchedule")
        .def_readonly("embeddings", &NullSchedule::embeddings)
        .def_readonly("initial_loss", &NullSchedule::initial_loss)
        .def_readonly("final_loss", &NullSchedule::final_loss)
        .def_property_readonly("steps", &NullSchedule::steps);
    m.def("save_null_schedule", &save_null_schedule, py::arg("schedule"), py::arg("path"));
    m.def("load_null_schedule", &load_null_schedule, py::arg("path"));

    m.def("guided_velocity",
          [](const Checkpoint& ckpt, const std::vector<double>& z, double t, TokenId token, double guidance) {
              const auto cond = condition_for(ckpt, token);
              return guided_velocity(ckpt.field, to_latent(z), t, cond, ckpt.field.embedding_row(kEmptyToken),
                                     guidance)
                  .values;
          },
          py::arg("checkpoint"), py::arg("z"), py::arg("t"), py::arg("token"), py::arg("guidance") = 5.0);
    m.def("invert",
          [](const Checkpoint& ckpt, const std::vector<double>& z0, TokenId token, const GuidanceConfig& cfg) {
              return invert(ckpt.field, to_latent(z0), condition_for(ckpt, token), cfg);
          },
          py::arg("checkpoint"), py::arg("z0"), py::arg("token") = kEmptyToken, py::arg("config") = GuidanceConfig{});
    m.def("sample",
          [](const Checkpoint& ckpt, const std::vector<double>& z1, TokenId token, const GuidanceConfig& cfg,
             const NullSchedule* schedule) {
              return sample(ckpt.field, to_latent(z1), condition_for(ckpt, token), cfg, schedule);
          },
          py::arg("checkpoint"), py::arg("z1"), py::arg("token") = kEmptyToken,
          py::arg("config") = GuidanceConfig{}, py::arg("schedule") = nullptr);

    py::class_<NtiResult>(m, "NtiResult")
        .def_readonly("schedule", &NtiResult::schedule)
        .def_readonly("trajectory", &NtiResult::trajectory)
        .def_property_readonly("reconstruction", [](const NtiResult& r) { return r.reconstruction.values; });
    m.def("nti_optimize",
          [](const Checkpoint& ckpt, const Trajectory& reference, TokenId token, const NTIConfig& cfg) {
              return nti_optimize(ckpt.field, reference, condition_for(ckpt, token), cfg);
          },
          py::arg("checkpoint"), py::arg("reference"), py::arg("token") = kEmptyToken,
          py::arg("config") = NTIConfig{});

    py::class_<EditResult>(m, "EditResult")
        .def_property_readonly("edited", [](const EditResult& r) { return r.edited.values; })
        .def_property_readonly("reconstruction", [](const EditResult& r) { return r.reconstruction.values; })
        .def_readonly("inversion", &EditResult::inversion)
        .def_readonly("edit_trajectory", &EditResult::edit_trajectory)
        .def_readonly("reconstruction_trajectory", &EditResult::reconstruction_trajectory)
        .def_readonly("schedule", &EditResult::schedule)
        .def_readonly("reconstruction_l1", &EditResult::reconstruction_l1)
        .def_readonly("edit_l1", &EditResult::edit_l1)
        .def_readonly("source_mode", &EditResult::source_mode)
        .def_readonly("target_mode", &EditResult::target_mode)
        .def_readonly("edited_mode", &EditResult::edited_mode)
        .def_readonly("structure_distance", &EditResult::structure_distance)
        .def_readonly("implausible", &EditResult::implausible);
    m.def("edit",
          [](const Checkpoint& ckpt, const std::vector<double>& source, TokenId edit_token, bool use_nti,
             const GuidanceConfig& guidance, const NTIConfig& nti) {
              EditRequest req;
              req.source = to_latent(source);
              req.edit_token = edit_token;
              req.use_nti = use_nti;
              req.guidance = guidance;
              req.nti = nti;
              return edit(ckpt.field, ckpt.dataset, req);
          },
          py::arg("checkpoint"), py::arg("source"), py::arg("edit_token"), py::arg("use_nti") = true,
          py::arg("guidance") = GuidanceConfig{}, py::arg("nti") = NTIConfig{});

    m.def("avg_pairwise_cosine_distance",
          [](const std::vector<Vector>& vs) { return avg_pairwise_cosine_distance(vs); });
    m.def("l1_reconstruction", [](const std::vector<double>& a, const std::vector<double>& b) {
        return l1_reconstruction(to_latent(a), to_latent(b));
    });

    py::class_<DiversityReport>(m, "DiversityReport")
        .def_readonly("anchor", &DiversityReport::anchor)
        .def_readonly("delta_vis", &DiversityReport::delta_vis)
        .def_readonly("delta_txt", &DiversityReport::delta_txt)
        .def_readonly("ratio", &DiversityReport::ratio)
        .def_readonly("degenerate_prompts", &DiversityReport::degenerate_prompts)
        .def_readonly("n", &DiversityReport::n);
    m.def("diversity_ratio",
          [](const std::vector<Vector>& vis, const std::vector<Vector>& txt, const std::string& anchor) {
              return diversity_ratio(vis, txt, anchor);
          },
          py::arg("vis"), py::arg("txt"), py::arg("anchor") = "");

    py::class_<KindSummary>(m, "KindSummary")
        .def_property_readonly("kind", [](const KindSummary& k) { return std::string(to_string(k.kind)); })
        .def_readonly("trials", &KindSummary::trials)
        .def_readonly("failures", &KindSummary::failures)
        .def_readonly("l1_mean", &KindSummary::l1_mean)
        .def_readonly("l1_std", &KindSummary::l1_std)
        .def_readonly("fail_rate", &KindSummary::fail_rate)
        .def_readonly("norm_mean", &KindSummary::norm_mean)
        .def_readonly("norm_trace", &KindSummary::norm_trace);
    py::class_<ReconRow>(m, "ReconRow")
        .def_readonly("config", &ReconRow::config)
        .def_readonly("trials", &ReconRow::trials)
        .def_readonly("failures", &ReconRow::failures)
        .def_readonly("l1_mean", &ReconRow::l1_mean)
        .def_readonly("l1_std", &ReconRow::l1_std)
        .def_readonly("fail_rate", &ReconRow::fail_rate);

    m.def("run_sink_experiment",
          [](const Checkpoint& ckpt, const std::vector<std::string>& anchors, std::size_t samples_per_token,
             std::uint64_t seed, const GuidanceConfig& cfg) {
              py::gil_scoped_release release;
              return run_sink_experiment(ckpt, anchors, samples_per_token, seed, cfg);
          },
          py::arg("checkpoint"), py::arg("anchors") = std::vector<std::string>{},
          py::arg("samples_per_token") = 8, py::arg("seed") = 0, py::arg("config") = GuidanceConfig{});
    m.def("run_prompt_type_experiment",
          [](const Checkpoint& ckpt, std::size_t trials, std::uint64_t seed, const GuidanceConfig& cfg,
             const std::vector<std::string>& kinds) {
              std::vector<ConditionKind> ks;
              for (const auto& k : kinds) {
                  ks.push_back(condition_kind_from_string(k));
              }
              py::gil_scoped_release release;
              return run_prompt_type_experiment(ckpt, trials, seed, cfg, ks).rows;
          },
          py::arg("checkpoint"), py::arg("trials"), py::arg("seed"), py::arg("config") = GuidanceConfig{},
          py::arg("kinds") = std::vector<std::string>{"true", "approximate", "empty"});
    m.def("run_reconstruction_table",
          [](const Checkpoint& ckpt, std::size_t trials, std::uint64_t seed, const GuidanceConfig& cfg,
             const NTIConfig& nti) {
              py::gil_scoped_release release;
              return run_reconstruction_table(ckpt, trials, seed, cfg, nti).rows;
          },
          py::arg("checkpoint"), py::arg("trials"), py::arg("seed"), py::arg("config") = GuidanceConfig{},
          py::arg("nti") = NTIConfig{});
}
