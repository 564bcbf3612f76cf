#pragma once

#include "cosmo/tg/tensor.hpp"

#include <map>
#include <string>

namespace tg {

// Named-tensor store with a small versioned binary format. Round-trips
// bitwise: save(load(f)) reproduces f byte for byte.
//
// Layout (little endian):
//   magic "TGC1" | u32 version | u64 meta_len | meta bytes (UTF-8, free-form)
//   u64 n_entries | entries
// Entry:
//   u32 name_len | name | u8 dtype (0=f64, 1=f32) | u32 ndim | u32 dims[ndim]
//   | raw scalars
class Checkpoint {
public:
    std::string meta;  // typically a JSON config blob

    void put(const std::string& name, const Tensor& t) { tensors_[name] = t.detach(); }
    bool has(const std::string& name) const { return tensors_.count(name) != 0; }
    Tensor get(const std::string& name) const;
    const std::map<std::string, Tensor>& tensors() const { return tensors_; }

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);

    // FNV-1a over the serialized bytes; used to stamp run metadata.
    static uint64_t file_hash(const std::string& path);

private:
    std::map<std::string, Tensor> tensors_;  // ordered -> canonical byte layout
};

}  // namespace tg
