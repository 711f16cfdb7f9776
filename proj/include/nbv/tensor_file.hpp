#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace nbv {

// Flat binary container shared by every weights artifact: named f32 tensors with
// explicit shapes plus a free-form provenance string recorded by the producer.
struct NamedTensor {
    std::string name;
    std::vector<uint32_t> dims;
    std::vector<float> data;

    size_t element_count() const {
        size_t n = 1;
        for (uint32_t d : dims) n *= d;
        return n;
    }
};

struct TensorFile {
    std::string provenance;
    std::vector<NamedTensor> tensors;

    const NamedTensor& find(const std::string& name) const;
    bool has(const std::string& name) const;

    void add(const std::string& name, std::vector<uint32_t> dims, const std::vector<double>& data);
    std::vector<double> take(const std::string& name) const;  // as doubles

    void save(const std::string& path) const;
    static TensorFile load(const std::string& path);
};

}  // namespace nbv
