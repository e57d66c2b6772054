#include "flowinv/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <iterator>

#include "flowinv/errors.hpp"

namespace flowinv {

namespace {

constexpr char kMagic[4] = {'F', 'I', 'N', 'V'};

template <typename U>
void put_le(std::string& out, U value) {
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        out.push_back(static_cast<char>((value >> (8 * i)) & 0xffu));
    }
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    template <typename U>
    U get_le(const char* what) {
        need(sizeof(U), what);
        U value = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) {
            value |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        }
        pos_ += sizeof(U);
        return value;
    }

    std::string_view take(std::uint64_t n, const char* what) {
        need(n, what);
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::uint64_t n, const char* what) const {
        if (n > bytes_.size() - pos_) {
            throw CorruptFileError(std::string("truncated file while reading ") + what);
        }
    }

    std::string_view bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string encode_container(const Container& c) {
    const std::string header = c.header.dump();
    std::string out(kMagic, sizeof(kMagic));
    put_le<std::uint32_t>(out, c.version);
    put_le<std::uint64_t>(out, header.size());
    out += header;
    put_le<std::uint64_t>(out, c.values.size());
    for (double v : c.values) {
        put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    }
    return out;
}

Container decode_container(std::string_view bytes) {
    Reader r(bytes);
    const auto magic = r.take(4, "magic");
    if (magic != std::string_view(kMagic, 4)) {
        throw CorruptFileError("bad magic bytes (not a FINV file)");
    }
    Container c;
    c.version = r.get_le<std::uint32_t>("version");
    if (c.version != kCheckpointVersion) {
        throw VersionError(c.version, kCheckpointVersion);
    }
    const auto header_len = r.get_le<std::uint64_t>("header length");
    const auto header = r.take(header_len, "header");
    try {
        c.header = nlohmann::json::parse(header);
    } catch (const nlohmann::json::exception& e) {
        throw CorruptFileError(std::string("malformed header: ") + e.what());
    }
    const auto count = r.get_le<std::uint64_t>("value count");
    if (count > r.remaining() / 8) {
        throw CorruptFileError("truncated file while reading parameter block");
    }
    c.values.resize(count);
    for (auto& v : c.values) {
        v = std::bit_cast<double>(r.get_le<std::uint64_t>("parameter block"));
    }
    if (r.remaining() != 0) {
        throw CorruptFileError("trailing bytes after parameter block");
    }
    return c;
}

void write_container(const Container& c, const std::filesystem::path& path) {
    const std::string bytes = encode_container(c);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw CheckpointError("io", "cannot open " + path.string() + " for writing");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw CheckpointError("io", "failed writing " + path.string());
    }
}

Container read_container(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw CheckpointError("io", "cannot open " + path.string());
    }
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_container(bytes);
}

nlohmann::json to_json(const FieldDims& dims) {
    return {{"latent_dim", dims.latent_dim},
            {"embed_dim", dims.embed_dim},
            {"vocab_size", dims.vocab_size},
            {"hidden", dims.hidden},
            {"activation", "tanh"}};
}

FieldDims field_dims_from_json(const nlohmann::json& j) {
    FieldDims d;
    d.latent_dim = j.at("latent_dim").get<std::size_t>();
    d.embed_dim = j.at("embed_dim").get<std::size_t>();
    d.vocab_size = j.at("vocab_size").get<std::size_t>();
    d.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    if (j.value("activation", "tanh") != "tanh") {
        throw CorruptFileError("unsupported activation '" + j.at("activation").get<std::string>() + "'");
    }
    return d;
}

nlohmann::json to_json(const DatasetSpec& spec) {
    nlohmann::json anchors = nlohmann::json::array();
    for (const auto& a : spec.anchors) {
        nlohmann::json modes = nlohmann::json::array();
        for (const auto& m : a.modes) {
            modes.push_back({{"mean", m.mean}, {"stddev", m.stddev}});
        }
        anchors.push_back({{"name", a.name},
                           {"sink", a.sink},
                           {"tokens", a.tokens},
                           {"mode_of_token", a.mode_of_token},
                           {"modes", modes}});
    }
    return {{"latent_dim", spec.latent_dim},
            {"anchors", anchors},
            {"ood_tokens", spec.ood_tokens},
            {"p_uncond", spec.p_uncond},
            {"seed", spec.seed}};
}

DatasetSpec dataset_spec_from_json(const nlohmann::json& j) {
    DatasetSpec spec;
    spec.latent_dim = j.at("latent_dim").get<std::size_t>();
    spec.ood_tokens = j.at("ood_tokens").get<std::vector<TokenId>>();
    spec.p_uncond = j.at("p_uncond").get<double>();
    spec.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& ja : j.at("anchors")) {
        Anchor a;
        a.name = ja.at("name").get<std::string>();
        a.sink = ja.at("sink").get<bool>();
        a.tokens = ja.at("tokens").get<std::vector<TokenId>>();
        a.mode_of_token = ja.at("mode_of_token").get<std::vector<std::size_t>>();
        for (const auto& jm : ja.at("modes")) {
            a.modes.push_back(Mode{jm.at("mean").get<Vector>(), jm.at("stddev").get<double>()});
        }
        spec.anchors.push_back(std::move(a));
    }
    return spec;
}

nlohmann::json to_json(const TrainConfig& cfg) {
    return {{"batch_size", cfg.batch_size}, {"iterations", cfg.iterations},
            {"lr", cfg.lr},                 {"lr_floor", cfg.lr_floor},
            {"seed", cfg.seed},             {"dims", to_json(cfg.dims)},
            {"threads", cfg.threads}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig cfg;
    cfg.batch_size = j.at("batch_size").get<std::size_t>();
    cfg.iterations = j.at("iterations").get<std::size_t>();
    cfg.lr = j.at("lr").get<double>();
    cfg.lr_floor = j.at("lr_floor").get<double>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.dims = field_dims_from_json(j.at("dims"));
    cfg.threads = j.at("threads").get<std::size_t>();
    return cfg;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    Container c;
    c.version = ckpt.version;
    c.header = {{"kind", "checkpoint"},
                {"field", to_json(ckpt.field.dims())},
                {"dataset", to_json(ckpt.dataset)},
                {"train_config", to_json(ckpt.config)},
                {"parameter_count", ckpt.field.parameter_count()}};
    const auto p = ckpt.field.parameters();
    c.values.assign(p.begin(), p.end());
    write_container(c, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    Container c = read_container(path);
    try {
        if (c.header.at("kind") != "checkpoint") {
            throw CorruptFileError(path.string() + " is not a checkpoint");
        }
        Checkpoint ckpt;
        ckpt.version = c.version;
        ckpt.dataset = dataset_spec_from_json(c.header.at("dataset"));
        ckpt.config = train_config_from_json(c.header.at("train_config"));
        ckpt.field = VelocityField(field_dims_from_json(c.header.at("field")), std::move(c.values));
        return ckpt;
    } catch (const nlohmann::json::exception& e) {
        throw CorruptFileError(std::string("malformed checkpoint header: ") + e.what());
    } catch (const ShapeError& e) {
        throw CorruptFileError(std::string("checkpoint parameter block: ") + e.what());
    }
}

void save_null_schedule(const NullSchedule& schedule, const std::filesystem::path& path) {
    const std::size_t dc = schedule.embeddings.empty() ? 0 : schedule.embeddings.front().size();
    Container c;
    c.header = {{"kind", "null_schedule"}, {"steps", schedule.steps()}, {"embed_dim", dc}};
    for (const auto& e : schedule.embeddings) {
        c.values.insert(c.values.end(), e.begin(), e.end());
    }
    c.values.insert(c.values.end(), schedule.initial_loss.begin(), schedule.initial_loss.end());
    c.values.insert(c.values.end(), schedule.final_loss.begin(), schedule.final_loss.end());
    write_container(c, path);
}

NullSchedule load_null_schedule(const std::filesystem::path& path) {
    const Container c = read_container(path);
    try {
        if (c.header.at("kind") != "null_schedule") {
            throw CorruptFileError(path.string() + " is not a null schedule");
        }
        const auto steps = c.header.at("steps").get<std::size_t>();
        const auto dc = c.header.at("embed_dim").get<std::size_t>();
        if (c.values.size() != steps * dc + 2 * steps) {
            throw CorruptFileError("null schedule block has the wrong length");
        }
        NullSchedule s;
        auto it = c.values.begin();
        for (std::size_t i = 0; i < steps; ++i) {
            s.embeddings.emplace_back(it, it + static_cast<std::ptrdiff_t>(dc));
            it += static_cast<std::ptrdiff_t>(dc);
        }
        s.initial_loss.assign(it, it + static_cast<std::ptrdiff_t>(steps));
        it += static_cast<std::ptrdiff_t>(steps);
        s.final_loss.assign(it, it + static_cast<std::ptrdiff_t>(steps));
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw CorruptFileError(std::string("malformed null schedule header: ") + e.what());
    }
}

}  // namespace flowinv
