#include "megae/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "megae/errors.hpp"

namespace megae {

namespace {

constexpr const char* kMagic = "MEGAE-CHECKPOINT 1";

void write_le(std::ostream& out, double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    unsigned char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(bytes), 8);
}

double read_le(std::istream& in) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw DataError("checkpoint payload truncated");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    ckpt.params.validate();
    const ModelShape s = ckpt.params.shape();
    nlohmann::json tensors = nlohmann::json::array();
    ckpt.params.for_each([&tensors](const Matrix& w) { tensors.push_back({w.rows(), w.cols()}); });
    nlohmann::json header{{"shape", {{"channels", s.channels}, {"d_in", s.d_in}, {"h1", s.h1}, {"h2", s.h2}, {"h3", s.h3}}},
                          {"slope", ckpt.params.slope},
                          {"seed", ckpt.config.seed},
                          {"config", ckpt.config},
                          {"frame", ckpt.frame},
                          {"filter_options", ckpt.filter_options},
                          {"tensors", tensors},
                          {"layout", "row-major float64 little-endian"},
                          {"extra", ckpt.extra}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    out << kMagic << '\n' << header.dump() << '\n';
    ckpt.params.for_each([&out](const Matrix& w) {
        for (Eigen::Index i = 0; i < w.rows(); ++i) {
            for (Eigen::Index j = 0; j < w.cols(); ++j) write_le(out, w(i, j));
        }
    });
    if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path.string());
    std::string magic;
    std::string header_line;
    if (!std::getline(in, magic) || magic != kMagic) throw DataError(path.string() + ": not a MEGAE checkpoint");
    if (!std::getline(in, header_line)) throw DataError(path.string() + ": missing header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_line);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": bad header: " + e.what());
    }
    Checkpoint ckpt;
    const auto& sh = header.at("shape");
    ModelShape shape{sh.at("channels").get<int>(), sh.at("d_in").get<int>(), sh.at("h1").get<int>(),
                     sh.at("h2").get<int>(), sh.at("h3").get<int>()};
    ckpt.params = ModelParams::zeros(shape, header.at("slope").get<double>());
    ckpt.config = header.at("config").get<TrainConfig>();
    ckpt.frame = header.at("frame").get<FrameSpec>();
    ckpt.filter_options = header.at("filter_options").get<FilterBankOptions>();
    ckpt.extra = header.value("extra", nlohmann::json::object());
    ckpt.params.for_each([&in](Matrix& w) {
        for (Eigen::Index i = 0; i < w.rows(); ++i) {
            for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = read_le(in);
        }
    });
    if (in.peek() != std::char_traits<char>::eof()) throw DataError(path.string() + ": trailing bytes after payload");
    ckpt.params.validate();
    return ckpt;
}

}  // namespace megae
