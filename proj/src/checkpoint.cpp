#include "ris_sense/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ris_sense/errors.hpp"

namespace ris::nn {

namespace {

using Kind = FormatError::Kind;
constexpr char kMagic[4] = {'C', 'C', 'N', 'N'};

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(Kind::Io, "cannot open checkpoint " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct Parsed {
    CheckpointInfo info;
    std::size_t payload_offset = 0;
};

Parsed parse_prefix(const std::string& bytes, const std::filesystem::path& path) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
        throw FormatError(Kind::BadMagic, path.string() + ": not a CCNN checkpoint (bad magic)");
    }
    if (bytes.size() < 12) throw FormatError(Kind::TruncatedPayload, path.string() + ": truncated header");
    const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
    Parsed parsed;
    parsed.info.version = get_u32(raw + 4);
    if (parsed.info.version != kCheckpointVersion) {
        throw FormatError(Kind::UnsupportedVersion,
                          path.string() + ": unsupported checkpoint version " + std::to_string(parsed.info.version));
    }
    const std::uint32_t header_len = get_u32(raw + 8);
    if (bytes.size() < 12 + static_cast<std::size_t>(header_len)) {
        throw FormatError(Kind::TruncatedPayload, path.string() + ": truncated header");
    }
    try {
        parsed.info.header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + header_len);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(Kind::BadHeader, path.string() + ": malformed header: " + e.what());
    }
    parsed.payload_offset = 12 + header_len;
    return parsed;
}

nlohmann::json tensor_list(const std::vector<std::string>& names, const std::vector<const Tensor*>& tensors) {
    auto list = nlohmann::json::array();
    for (std::size_t i = 0; i < names.size(); ++i) {
        list.push_back({{"name", names[i]}, {"shape", tensors[i]->shape()}});
    }
    return list;
}

}  // namespace

nlohmann::json architecture_to_json(const Architecture& arch) {
    return {{"input_channels", arch.input_channels},
            {"input_size", arch.input_size},
            {"filters", arch.filters},
            {"hidden", arch.hidden},
            {"classes", arch.classes},
            {"dropout_p", arch.dropout_p},
            {"kernel", 3},
            {"padding", 1},
            {"stride", 1},
            {"pool", 2}};
}

Architecture architecture_from_json(const nlohmann::json& j) {
    try {
        Architecture arch;
        arch.input_channels = j.at("input_channels").get<std::size_t>();
        arch.input_size = j.at("input_size").get<std::size_t>();
        arch.filters = j.at("filters").get<std::array<std::size_t, 3>>();
        arch.hidden = j.at("hidden").get<std::size_t>();
        arch.classes = j.at("classes").get<std::size_t>();
        arch.dropout_p = j.at("dropout_p").get<double>();
        arch.validate();
        return arch;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(Kind::BadHeader, std::string("architecture header: ") + e.what());
    }
}

void save_checkpoint(const CcnnModel& model, const std::filesystem::path& path, std::uint64_t seed,
                     const nlohmann::json& training) {
    static_assert(std::endian::native == std::endian::little, "checkpoint writer assumes a little-endian host");
    const auto params = model.parameters();
    const auto buffers = model.buffers();
    const std::size_t stored = model.parameter_count() + model.buffer_count();
    nlohmann::json header = {{"format", "ccnn-checkpoint"},
                             {"architecture", architecture_to_json(model.architecture())},
                             {"parameters", tensor_list(model.parameter_names(), params)},
                             {"buffers", tensor_list(model.buffer_names(), buffers)},
                             {"parameter_count", model.parameter_count()},
                             {"stored_value_count", stored},
                             {"dtype", "float32-le"},
                             {"class_order", {"LOS", "NLOS-1.00m", "NLOS-0.75m"}},
                             {"seed", seed},
                             {"training", training}};
    const std::string header_text = header.dump();

    std::string out(kMagic, 4);
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<std::uint32_t>(header_text.size()));
    out += header_text;
    const std::size_t payload_start = out.size();
    out.resize(payload_start + 4 * stored);
    char* cursor = out.data() + payload_start;
    auto write_tensor = [&cursor](const Tensor* t) {
        for (double v : t->data()) {
            const float f = static_cast<float>(v);
            std::memcpy(cursor, &f, 4);
            cursor += 4;
        }
    };
    for (const auto* t : params) write_tensor(t);
    for (const auto* t : buffers) write_tensor(t);

    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw FormatError(Kind::Io, "cannot write checkpoint " + path.string());
    file.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!file) throw FormatError(Kind::Io, "failed writing checkpoint " + path.string());
}

CheckpointInfo read_checkpoint_info(const std::filesystem::path& path) {
    return parse_prefix(read_file(path), path).info;
}

CcnnModel load_checkpoint(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    const Parsed parsed = parse_prefix(bytes, path);
    const auto& header = parsed.info.header;
    if (!header.contains("architecture")) throw FormatError(Kind::BadHeader, path.string() + ": header lacks architecture");
    CcnnModel model(architecture_from_json(header.at("architecture")));
    const std::size_t stored = model.parameter_count() + model.buffer_count();
    if (header.value("stored_value_count", std::size_t{0}) != stored) {
        throw FormatError(Kind::BadHeader, path.string() + ": stored value count disagrees with architecture");
    }
    const std::size_t available = bytes.size() - parsed.payload_offset;
    if (available < 4 * stored) {
        throw FormatError(Kind::TruncatedPayload, path.string() + ": payload has " + std::to_string(available) +
                                                      " bytes, expected " + std::to_string(4 * stored));
    }
    const char* cursor = bytes.data() + parsed.payload_offset;
    auto read_tensor = [&cursor](Tensor* t) {
        for (auto& v : t->data()) {
            float f;
            std::memcpy(&f, cursor, 4);
            cursor += 4;
            v = static_cast<double>(f);
        }
    };
    for (auto* t : model.parameters()) read_tensor(t);
    for (auto* t : model.buffers()) read_tensor(t);
    model.set_mode(Mode::Eval);
    return model;
}

}  // namespace ris::nn
