#include "nbv/tensor_file.hpp"

#include <fstream>
#include <stdexcept>

namespace nbv {

namespace {

constexpr char kMagic[4] = {'N', 'B', 'V', 'W'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ofstream& out, uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

uint32_t read_u32(std::ifstream& in) {
    uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

void write_string(std::ofstream& out, const std::string& s) {
    write_u32(out, static_cast<uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::ifstream& in) {
    const uint32_t len = read_u32(in);
    if (len > (1u << 24)) throw std::runtime_error("corrupt tensor file: oversized string");
    std::string s(len, '\0');
    in.read(s.data(), len);
    return s;
}

}  // namespace

const NamedTensor& TensorFile::find(const std::string& name) const {
    for (const NamedTensor& t : tensors) {
        if (t.name == name) return t;
    }
    throw std::runtime_error("tensor not found: " + name);
}

bool TensorFile::has(const std::string& name) const {
    for (const NamedTensor& t : tensors) {
        if (t.name == name) return true;
    }
    return false;
}

void TensorFile::add(const std::string& name, std::vector<uint32_t> dims,
                     const std::vector<double>& data) {
    NamedTensor t;
    t.name = name;
    t.dims = std::move(dims);
    t.data.reserve(data.size());
    for (double x : data) t.data.push_back(static_cast<float>(x));
    if (t.data.size() != t.element_count()) {
        throw std::runtime_error("tensor shape mismatch for " + name);
    }
    tensors.push_back(std::move(t));
}

std::vector<double> TensorFile::take(const std::string& name) const {
    const NamedTensor& t = find(name);
    return {t.data.begin(), t.data.end()};
}

void TensorFile::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write tensor file: " + path);
    out.write(kMagic, 4);
    write_u32(out, kVersion);
    write_string(out, provenance);
    write_u32(out, static_cast<uint32_t>(tensors.size()));
    for (const NamedTensor& t : tensors) {
        write_string(out, t.name);
        write_u32(out, static_cast<uint32_t>(t.dims.size()));
        for (uint32_t d : t.dims) write_u32(out, d);
        out.write(reinterpret_cast<const char*>(t.data.data()),
                  static_cast<std::streamsize>(t.data.size() * sizeof(float)));
    }
}

TensorFile TensorFile::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read tensor file: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != std::string(kMagic, 4)) {
        throw std::runtime_error("not a tensor file: " + path);
    }
    if (read_u32(in) != kVersion) throw std::runtime_error("unsupported tensor file version");
    TensorFile file;
    file.provenance = read_string(in);
    const uint32_t count = read_u32(in);
    for (uint32_t i = 0; i < count; ++i) {
        NamedTensor t;
        t.name = read_string(in);
        const uint32_t rank = read_u32(in);
        for (uint32_t r = 0; r < rank; ++r) t.dims.push_back(read_u32(in));
        t.data.resize(t.element_count());
        in.read(reinterpret_cast<char*>(t.data.data()),
                static_cast<std::streamsize>(t.data.size() * sizeof(float)));
        if (!in) throw std::runtime_error("truncated tensor file: " + path);
        file.tensors.push_back(std::move(t));
    }
    return file;
}

}  // namespace nbv
