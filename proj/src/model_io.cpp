#include "og/model_io.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>

namespace og {

namespace {

constexpr char kMagic[8] = {'O', 'G', 'R', 'M', 'O', 'D', 'E', 'L'};

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_double(std::string& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, sizeof(bits));
    put_u64(out, bits);
}

std::uint32_t get_u32(const std::string& in, std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[off + i])) << (8 * i);
    return v;
}

std::uint64_t get_u64(const std::string& in, std::size_t off) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[off + i])) << (8 * i);
    return v;
}

double get_double(const std::string& in, std::size_t off) {
    std::uint64_t bits = get_u64(in, off);
    double d;
    std::memcpy(&d, &bits, sizeof(d));
    return d;
}

std::uint32_t checksum(const std::string& bytes, std::size_t length) {
    uLong crc = crc32(0L, Z_NULL, 0);
    return static_cast<std::uint32_t>(
        crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(length)));
}

}  // namespace

void save_model(const GraderModel& model, const std::string& path) {
    GraderModel& m = const_cast<GraderModel&>(model);
    if (model.temperature <= 0.0) throw InvariantError("model temperature must be positive");

    std::vector<std::pair<std::string, Tensor*>> tensors = m.named_tensors();
    Tensor temperature = Tensor::vector({model.temperature});
    tensors.emplace_back("temperature", &temperature);

    nlohmann::json header;
    header["config"] = {
        {"k_widths", model.config.k_widths},   {"g_widths", model.config.g_widths},
        {"h_width", model.config.h_width},     {"batchnorm", model.config.batchnorm},
        {"preset_id", model.config.preset_id},
    };
    header["pipeline"] = {
        {"canny_sigma", model.pipeline.canny_sigma},
        {"canny_low", model.pipeline.canny_low},
        {"canny_high", model.pipeline.canny_high},
        {"whiteness_threshold", model.pipeline.whiteness_threshold},
        {"grid", model.pipeline.grid},
        {"palette", model.pipeline.palette},
    };
    nlohmann::json directory = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, tensor] : tensors) {
        directory.push_back({{"name", name}, {"shape", tensor->shape}, {"offset", offset}});
        offset += tensor->size();
    }
    header["tensors"] = std::move(directory);
    const std::string json = header.dump();

    std::string bytes;
    bytes.reserve(8 + 4 + 4 + 8 + json.size() + offset * 8 + 4);
    bytes.append(kMagic, sizeof(kMagic));
    put_u32(bytes, kModelFormatMajor);
    put_u32(bytes, kModelFormatMinor);
    put_u64(bytes, json.size());
    bytes += json;
    for (const auto& [name, tensor] : tensors) {
        for (double v : tensor->data) put_double(bytes, v);
    }
    put_u32(bytes, checksum(bytes, bytes.size()));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open model file for writing: " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed while writing model file: " + path);
}

GraderModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model file: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("failed while reading model file: " + path);

    constexpr std::size_t kFixed = 8 + 4 + 4 + 8;
    if (bytes.size() < kFixed + 4) throw IoError("model file is truncated: " + path);
    if (checksum(bytes, bytes.size() - 4) != get_u32(bytes, bytes.size() - 4)) {
        throw IoError("model file checksum mismatch (corrupted or truncated): " + path);
    }
    if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
        throw IoError("not a model file (bad magic): " + path);
    }
    const std::uint32_t major = get_u32(bytes, 8);
    const std::uint32_t minor = get_u32(bytes, 12);
    if (major > kModelFormatMajor) {
        throw IoError("model file format version " + std::to_string(major) + "." +
                      std::to_string(minor) + " is newer than the supported " +
                      std::to_string(kModelFormatMajor) + "." + std::to_string(kModelFormatMinor));
    }
    const std::uint64_t json_len = get_u64(bytes, 16);
    if (kFixed + json_len + 4 > bytes.size()) throw IoError("model file is truncated: " + path);

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.substr(kFixed, json_len));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("model file header is not valid JSON: " + std::string(e.what()));
    }

    GraderModel model;
    try {
        const nlohmann::json& c = header.at("config");
        GraderConfig config;
        config.k_widths = c.at("k_widths").get<std::vector<std::size_t>>();
        config.g_widths = c.at("g_widths").get<std::vector<std::size_t>>();
        config.h_width = c.at("h_width").get<std::size_t>();
        config.batchnorm = c.at("batchnorm").get<bool>();
        config.preset_id = c.at("preset_id").get<int>();
        model = make_model_shell(config);
        const nlohmann::json& p = header.at("pipeline");
        model.pipeline.canny_sigma = p.at("canny_sigma").get<double>();
        model.pipeline.canny_low = p.at("canny_low").get<double>();
        model.pipeline.canny_high = p.at("canny_high").get<double>();
        model.pipeline.whiteness_threshold = p.at("whiteness_threshold").get<int>();
        model.pipeline.grid = p.at("grid").get<std::size_t>();
        model.pipeline.palette = p.at("palette").get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError("model file header is missing fields: " + std::string(e.what()));
    }

    std::vector<std::pair<std::string, Tensor*>> expected = model.named_tensors();
    Tensor temperature = Tensor::zeros({1});
    expected.emplace_back("temperature", &temperature);

    const nlohmann::json& directory = header.at("tensors");
    if (!directory.is_array() || directory.size() != expected.size()) {
        throw IoError("model file tensor directory does not match the declared config");
    }
    const std::size_t blob_start = kFixed + json_len;
    const std::size_t blob_doubles = (bytes.size() - 4 - blob_start) / 8;
    for (std::size_t i = 0; i < expected.size(); ++i) {
        const nlohmann::json& entry = directory[i];
        auto& [name, tensor] = expected[i];
        if (entry.at("name").get<std::string>() != name) {
            throw IoError("model file tensor " + std::to_string(i) + " is named '" +
                          entry.at("name").get<std::string>() + "', expected '" + name + "'");
        }
        if (entry.at("shape").get<std::vector<std::size_t>>() != tensor->shape) {
            throw IoError("model file tensor '" + name + "' has an unexpected shape");
        }
        const std::uint64_t offset = entry.at("offset").get<std::uint64_t>();
        if (offset + tensor->size() > blob_doubles) {
            throw IoError("model file tensor '" + name + "' overruns the data blob");
        }
        for (std::size_t k = 0; k < tensor->size(); ++k) {
            tensor->data[k] = get_double(bytes, blob_start + (offset + k) * 8);
        }
    }
    model.temperature = temperature[0];
    if (!(model.temperature > 0.0)) throw IoError("model file carries a non-positive temperature");
    return model;
}

}  // namespace og
