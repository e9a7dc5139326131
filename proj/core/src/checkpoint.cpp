#include "dannkit/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace dannkit {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'A', 'D', 'S', 'H'};
constexpr std::uint8_t kVersion = 1;

json config_to_json(const BackboneConfig& c) {
    return json{{"input_size", c.input_size},
                {"input_channels", c.input_channels},
                {"stage_channels", c.stage_channels},
                {"kernel", c.kernel},
                {"embedding_dim", c.embedding_dim},
                {"num_classes", c.num_classes},
                {"num_domains", c.num_domains},
                {"discriminator_hidden", c.discriminator_hidden}};
}

BackboneConfig config_from_json(const json& j) {
    BackboneConfig c;
    c.input_size = j.at("input_size").get<std::size_t>();
    c.input_channels = j.at("input_channels").get<std::size_t>();
    c.stage_channels = j.at("stage_channels").get<std::vector<std::size_t>>();
    c.kernel = j.at("kernel").get<std::size_t>();
    c.embedding_dim = j.at("embedding_dim").get<std::size_t>();
    c.num_classes = j.at("num_classes").get<std::size_t>();
    c.num_domains = j.at("num_domains").get<std::size_t>();
    c.discriminator_hidden = j.at("discriminator_hidden").get<std::size_t>();
    return c;
}

std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void write_u32le(std::ostream& os, std::uint32_t v) {
    const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                           static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    os.write(bytes, 4);
}

std::uint32_t read_u32le(std::istream& is) {
    unsigned char bytes[4];
    is.read(reinterpret_cast<char*>(bytes), 4);
    return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
           (static_cast<std::uint32_t>(bytes[2]) << 16) | (static_cast<std::uint32_t>(bytes[3]) << 24);
}

void write_f64le(std::ostream& os, const std::vector<double>& values) {
    for (const double v : values) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        char bytes[8];
        for (int i = 0; i < 8; ++i) {
            bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
        }
        os.write(bytes, 8);
    }
}

void read_f64le(std::istream& is, std::vector<double>& values) {
    for (double& v : values) {
        unsigned char bytes[8];
        is.read(reinterpret_cast<char*>(bytes), 8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) {
            bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
        }
        std::memcpy(&v, &bits, sizeof v);
    }
}

} // namespace

std::string config_hash(const BackboneConfig& config) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(config_to_json(config).dump())));
    return buf;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const CheckpointMeta& meta) {
    json header;
    header["config"] = config_to_json(params.config);
    header["config_hash"] = config_hash(params.config);
    header["meta"] = {{"epoch", meta.epoch},
                      {"validation_loss", meta.validation_loss},
                      {"validation_accuracy", meta.validation_accuracy}};

    json plist = json::array();
    std::uint64_t offset = 0;
    auto describe = [&](const char* group, const ParamGroup& g) {
        for (const Param& p : g.params) {
            plist.push_back({{"group", group},
                             {"name", p.name},
                             {"shape", p.value.shape},
                             {"offset", offset}});
            offset += p.value.size() * sizeof(double);
        }
    };
    describe("extractor", params.extractor);
    describe("classifier", params.classifier);
    describe("discriminator", params.discriminator);
    header["params"] = std::move(plist);

    const std::string header_text = header.dump();

    // Write to a sibling temp file first so an interrupted save never
    // clobbers the previous valid checkpoint.
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) {
            throw IoError("cannot open checkpoint for writing: " + tmp.string());
        }
        os.write(kMagic, 4);
        os.put(static_cast<char>(kVersion));
        write_u32le(os, static_cast<std::uint32_t>(header_text.size()));
        os.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
        for (const ParamGroup* g : {&params.extractor, &params.classifier, &params.discriminator}) {
            for (const Param& p : g->params) {
                write_f64le(os, p.value.values);
            }
        }
        if (!os) {
            throw IoError("checkpoint write failed: " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) {
        throw IoError("cannot open checkpoint: " + path.string());
    }
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) {
        throw IoError("not a checkpoint file (bad magic): " + path.string());
    }
    const int version = is.get();
    if (version != kVersion) {
        throw IoError("unsupported checkpoint version in " + path.string());
    }
    const std::uint32_t header_len = read_u32le(is);
    std::string header_text(header_len, '\0');
    is.read(header_text.data(), header_len);
    if (!is) {
        throw IoError("truncated checkpoint header: " + path.string());
    }

    json header;
    try {
        header = json::parse(header_text);
    } catch (const json::exception& e) {
        throw IoError("corrupt checkpoint header in " + path.string() + ": " + e.what());
    }

    Checkpoint ckpt;
    ckpt.params.config = config_from_json(header.at("config"));
    ckpt.meta.epoch = header.at("meta").at("epoch").get<std::size_t>();
    ckpt.meta.validation_loss = header.at("meta").at("validation_loss").get<double>();
    ckpt.meta.validation_accuracy = header.at("meta").at("validation_accuracy").get<double>();
    ckpt.meta.config_hash = header.at("config_hash").get<std::string>();

    const std::string expected = config_hash(ckpt.params.config);
    if (ckpt.meta.config_hash != expected) {
        throw IoError("checkpoint config hash mismatch in " + path.string() + ": header says " +
                      ckpt.meta.config_hash + ", config hashes to " + expected);
    }

    for (const json& entry : header.at("params")) {
        Param p;
        p.name = entry.at("name").get<std::string>();
        p.value = Tensor(entry.at("shape").get<Shape>(), 0.0);
        read_f64le(is, p.value.values);
        if (!is) {
            throw IoError("truncated checkpoint blob section: " + path.string());
        }
        const std::string group = entry.at("group").get<std::string>();
        if (group == "extractor") {
            ckpt.params.extractor.params.push_back(std::move(p));
        } else if (group == "classifier") {
            ckpt.params.classifier.params.push_back(std::move(p));
        } else if (group == "discriminator") {
            ckpt.params.discriminator.params.push_back(std::move(p));
        } else {
            throw IoError("unknown parameter group '" + group + "' in " + path.string());
        }
    }
    return ckpt;
}

} // namespace dannkit
