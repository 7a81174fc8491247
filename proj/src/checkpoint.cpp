#include "partsum/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace partsum {

namespace {

constexpr char kMagic[8] = {'P', 'S', 'C', 'K', 'P', 'T', '1', '\n'};

void put_u64(std::ostream& os, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 8);
}

void put_f64(std::ostream& os, double d) {
    std::uint64_t v;
    std::memcpy(&v, &d, 8);
    put_u64(os, v);
}

std::uint64_t get_u64(std::istream& is, const std::string& path) {
    char b[8];
    if (!is.read(b, 8)) throw DataError("checkpoint " + path + ": truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    return v;
}

double get_f64(std::istream& is, const std::string& path) {
    const std::uint64_t v = get_u64(is, path);
    double d;
    std::memcpy(&d, &v, 8);
    return d;
}

}  // namespace

void save_checkpoint(const ParameterStore& params, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("checkpoint " + path + ": cannot open for writing");
    os.write(kMagic, 8);
    put_u64(os, params.size());
    for (const auto& [name, t] : params.entries()) {
        put_u64(os, name.size());
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u64(os, t.shape().size());
        for (int e : t.shape()) put_u64(os, static_cast<std::uint64_t>(e));
        for (double d : t.data()) put_f64(os, d);
    }
    if (!os) throw DataError("checkpoint " + path + ": write failed");
}

void load_checkpoint(ParameterStore& params, const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("checkpoint " + path + ": cannot open");
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
        throw DataError("checkpoint " + path + ": bad magic");
    }
    const std::uint64_t count = get_u64(is, path);
    if (count != params.size()) {
        throw DataError("checkpoint " + path + ": has " + std::to_string(count) + " parameters, model has " +
                        std::to_string(params.size()));
    }
    for (std::uint64_t k = 0; k < count; ++k) {
        const std::uint64_t name_len = get_u64(is, path);
        std::string name(name_len, '\0');
        if (!is.read(name.data(), static_cast<std::streamsize>(name_len))) {
            throw DataError("checkpoint " + path + ": truncated name at entry " + std::to_string(k));
        }
        if (!params.contains(name)) {
            throw DataError("checkpoint " + path + ": unknown parameter '" + name + "'");
        }
        Tensor t = params.get(name);
        const std::uint64_t ndim = get_u64(is, path);
        Shape shape(ndim);
        for (std::uint64_t i = 0; i < ndim; ++i) shape[i] = static_cast<int>(get_u64(is, path));
        if (shape != t.shape()) {
            throw DataError("checkpoint " + path + ": parameter '" + name + "' has shape " + shape_str(shape) +
                            ", model expects " + shape_str(t.shape()));
        }
        for (double& d : t.mutable_data()) d = get_f64(is, path);
    }
}

}  // namespace partsum
