#include "tempro/sequence_io.hpp"

#include <fstream>

#include <json.hpp>

namespace tempro::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ifstream open_in(const fs::path& p, std::ios::openmode mode = std::ios::binary) {
    std::ifstream f(p, mode);
    if (!f) throw std::runtime_error("cannot open " + p.string());
    return f;
}

std::ofstream open_out(const fs::path& p, std::ios::openmode mode = std::ios::binary) {
    std::ofstream f(p, mode);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    return f;
}

}  // namespace

void write_f32(const fs::path& file, std::span<const double> values) {
    std::vector<float> buf(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) buf[i] = static_cast<float>(values[i]);
    auto f = open_out(file);
    f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!f) throw std::runtime_error("short write to " + file.string());
}

std::vector<double> read_f32(const fs::path& file) {
    auto f = open_in(file);
    f.seekg(0, std::ios::end);
    const auto bytes = static_cast<std::size_t>(f.tellg());
    f.seekg(0);
    if (bytes % sizeof(float) != 0) throw std::runtime_error(file.string() + ": size is not a multiple of 4");
    std::vector<float> buf(bytes / sizeof(float));
    f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));
    if (!f) throw std::runtime_error("short read from " + file.string());
    return std::vector<double>(buf.begin(), buf.end());
}

void write_u8(const fs::path& file, std::span<const std::uint8_t> values) {
    auto f = open_out(file);
    f.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size()));
    if (!f) throw std::runtime_error("short write to " + file.string());
}

std::vector<std::uint8_t> read_u8(const fs::path& file) {
    auto f = open_in(file);
    f.seekg(0, std::ios::end);
    const auto bytes = static_cast<std::size_t>(f.tellg());
    f.seekg(0);
    std::vector<std::uint8_t> buf(bytes);
    f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));
    if (!f) throw std::runtime_error("short read from " + file.string());
    return buf;
}

void write_sequence(const fs::path& dir, const sim::Sequence& seq) {
    fs::create_directories(dir);
    write_f32(dir / (seq.name + ".bin"), seq.frames.data());

    json side;
    side["version"] = 1;
    side["T"] = seq.frames_count();
    side["H"] = seq.height();
    side["W"] = seq.width();
    side["dtype"] = "f32";
    side["has_mask"] = seq.has_mask();
    side["snr"] = seq.snr;
    side["tracks"] = json::array();
    for (const auto& tr : seq.tracks) {
        side["tracks"].push_back({{"x0", tr.x0},
                                  {"y0", tr.y0},
                                  {"vx", tr.vx},
                                  {"vy", tr.vy},
                                  {"sigma_spatial", tr.sigma_spatial},
                                  {"peak_intensity", tr.peak_intensity},
                                  {"t_enter", tr.t_enter},
                                  {"t_exit", tr.t_exit}});
    }
    side["noise"] = {{"sigma_n", seq.noise.sigma_n},
                     {"sigma_g", seq.noise.sigma_g},
                     {"sigma_o", seq.noise.sigma_o},
                     {"seed", seq.noise.seed}};
    auto jf = open_out(dir / (seq.name + ".json"), std::ios::out);
    jf << side.dump(2) << '\n';

    if (seq.has_mask()) {
        const auto m = seq.masks.data();
        std::vector<std::uint8_t> bytes(m.size());
        for (std::size_t i = 0; i < m.size(); ++i) bytes[i] = m[i] != 0.0 ? 1 : 0;
        write_u8(dir / (seq.name + ".mask.bin"), bytes);
    }
}

sim::Sequence read_sequence(const fs::path& dir, const std::string& name) {
    auto jf = open_in(dir / (name + ".json"), std::ios::in);
    json side = json::parse(jf);
    if (side.at("version").get<int>() != 1)
        throw std::runtime_error(name + ": unsupported sequence container version");
    const auto T = side.at("T").get<std::int64_t>();
    const auto H = side.at("H").get<std::int64_t>();
    const auto W = side.at("W").get<std::int64_t>();

    sim::Sequence seq;
    seq.name = name;
    seq.snr = side.value("snr", 0.0);
    std::vector<double> frames = read_f32(dir / (name + ".bin"));
    if (static_cast<std::int64_t>(frames.size()) != T * H * W)
        throw std::runtime_error(name + ".bin: size does not match sidecar dims");
    seq.frames = Tensor::from_data({T, H, W}, std::move(frames));

    for (const auto& jt : side.value("tracks", json::array())) {
        sim::TargetTrack tr;
        tr.x0 = jt.at("x0").get<double>();
        tr.y0 = jt.at("y0").get<double>();
        tr.vx = jt.at("vx").get<double>();
        tr.vy = jt.at("vy").get<double>();
        tr.sigma_spatial = jt.at("sigma_spatial").get<double>();
        tr.peak_intensity = jt.at("peak_intensity").get<double>();
        tr.t_enter = jt.at("t_enter").get<int>();
        tr.t_exit = jt.at("t_exit").get<int>();
        seq.tracks.push_back(tr);
    }
    if (side.contains("noise")) {
        const auto& jn = side["noise"];
        seq.noise.sigma_n = jn.value("sigma_n", 0.0);
        seq.noise.sigma_g = jn.value("sigma_g", 0.0);
        seq.noise.sigma_o = jn.value("sigma_o", 0.0);
        seq.noise.seed = jn.value("seed", std::uint64_t{0});
    }
    if (side.value("has_mask", false)) {
        std::vector<std::uint8_t> bytes = read_u8(dir / (name + ".mask.bin"));
        if (static_cast<std::int64_t>(bytes.size()) != T * H * W)
            throw std::runtime_error(name + ".mask.bin: size does not match sidecar dims");
        std::vector<double> m(bytes.size());
        for (std::size_t i = 0; i < bytes.size(); ++i) m[i] = bytes[i] ? 1.0 : 0.0;
        seq.masks = Tensor::from_data({T, H, W}, std::move(m));
    }
    return seq;
}

void write_manifest(const fs::path& dir, const std::vector<ManifestEntry>& entries) {
    fs::create_directories(dir);
    json j;
    j["version"] = 1;
    j["sequences"] = json::array();
    for (const auto& e : entries) j["sequences"].push_back({{"name", e.name}, {"split", e.split}});
    auto f = open_out(dir / "manifest.json", std::ios::out);
    f << j.dump(2) << '\n';
}

std::vector<ManifestEntry> read_manifest(const fs::path& dir) {
    auto f = open_in(dir / "manifest.json", std::ios::in);
    json j = json::parse(f);
    std::vector<ManifestEntry> entries;
    for (const auto& je : j.at("sequences"))
        entries.push_back({je.at("name").get<std::string>(), je.at("split").get<std::string>()});
    return entries;
}

}  // namespace tempro::io
