#pragma once

// Checkpoint format, little-endian:
//   magic "PSNN", version u16 = 1, network kind u8, tensor count u32, then
//   per tensor: name length u16 + UTF-8 name, rank u8, dims u32 each,
//   values f32.
// Network parameters (including batch-norm running statistics) are stored
// under their layer names; optimizer moments and fusion weights are stored
// as "optim.*" tensors when a training state is supplied.

#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "pressim/nn.hpp"
#include "pressim/nn_train.hpp"
#include "pressim/seqfile.hpp"

namespace pressim::nn {

namespace ckpt_detail {

inline constexpr char kMagic[4] = {'P', 'S', 'N', 'N'};
inline constexpr std::uint16_t kVersion = 1;

struct NamedTensor {
  std::string name;
  std::vector<int> dims;
  std::vector<float> values;
};

inline void append_tensor(std::string& out, const NamedTensor& t) {
  using namespace pressim::io_detail;
  put_u16(out, static_cast<std::uint16_t>(t.name.size()));
  put_bytes(out, t.name.data(), t.name.size());
  out.push_back(static_cast<char>(t.dims.size()));
  for (int d : t.dims) put_u32(out, static_cast<std::uint32_t>(d));
  for (float v : t.values) put_f32(out, v);
}

template <typename T>
NamedTensor from_tensor(const std::string& name, const Tensor<T>& t) {
  NamedTensor nt;
  nt.name = name;
  nt.dims = t.shape;
  nt.values.reserve(t.v.size());
  for (const T& v : t.v) nt.values.push_back(static_cast<float>(v));
  return nt;
}

inline NamedTensor scalar_tensor(const std::string& name, double v) {
  return {name, {1}, {static_cast<float>(v)}};
}

}  // namespace ckpt_detail

template <typename T>
void save_checkpoint(const std::string& path, Network<T>& net,
                     const TrainState<T>* state = nullptr) {
  using namespace ckpt_detail;
  using namespace pressim::io_detail;

  std::vector<NamedTensor> tensors;
  auto params = net.params();
  for (const auto& p : params)
    tensors.push_back(from_tensor(p.name, *p.value));

  if (state) {
    std::size_t slot = 0;
    for (const auto& p : params) {
      if (!p.trainable) continue;
      tensors.push_back(from_tensor("optim.m." + p.name, state->m[slot]));
      tensors.push_back(from_tensor("optim.v." + p.name, state->v[slot]));
      ++slot;
    }
    tensors.push_back(
        scalar_tensor("optim.step", static_cast<double>(state->step)));
    tensors.push_back(scalar_tensor("optim.epochs",
                                    static_cast<double>(state->completed_epochs)));
    tensors.push_back(scalar_tensor("optim.fusion_alpha", state->fusion_alpha));
    tensors.push_back(scalar_tensor("optim.fusion_beta", state->fusion_beta));
    tensors.push_back({"optim.fusion_m",
                       {2},
                       {static_cast<float>(state->fusion_m[0]),
                        static_cast<float>(state->fusion_m[1])}});
    tensors.push_back({"optim.fusion_v",
                       {2},
                       {static_cast<float>(state->fusion_v[0]),
                        static_cast<float>(state->fusion_v[1])}});
  }

  std::string out;
  put_bytes(out, kMagic, 4);
  put_u16(out, kVersion);
  out.push_back(static_cast<char>(net.kind));
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) append_tensor(out, t);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoFailure("cannot open for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoFailure("write failed: " + path);
}

template <typename T>
struct LoadedCheckpoint {
  Network<T> net;
  TrainState<T> state;
  bool has_state = false;
};

template <typename T = float>
LoadedCheckpoint<T> load_checkpoint(
    const std::string& path,
    std::optional<NetworkKind> expected_kind = std::nullopt) {
  using namespace ckpt_detail;
  using pressim::io_detail::Reader;

  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoFailure("cannot open for reading: " + path);
  std::string data((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  Reader r(std::move(data), path);

  char magic[4];
  r.raw(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("bad checkpoint magic in " + path);
  if (r.u16() != kVersion)
    throw FormatError("unsupported checkpoint version in " + path);
  const std::uint8_t kind_byte = r.u8();
  if (kind_byte > 3) throw FormatError("bad network kind in " + path);
  const auto kind = static_cast<NetworkKind>(kind_byte);
  if (expected_kind && kind != *expected_kind)
    throw KindMismatch(std::string("checkpoint holds ") + to_string(kind) +
                       ", expected " + to_string(*expected_kind) + ": " + path);

  LoadedCheckpoint<T> loaded{build_model<T>(kind, 0), {}, false};
  auto params = loaded.net.params();
  loaded.state.ensure_shapes(params);

  auto find_param = [&](const std::string& name) -> Tensor<T>* {
    for (auto& p : params)
      if (p.name == name) return p.value;
    return nullptr;
  };
  auto trainable_slot = [&](const std::string& name) -> std::size_t {
    std::size_t slot = 0;
    for (auto& p : params) {
      if (!p.trainable) continue;
      if (p.name == name) return slot;
      ++slot;
    }
    throw FormatError("optimizer tensor for unknown parameter '" + name +
                      "' in " + path);
  };

  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t name_len = r.u16();
    std::string name(name_len, '\0');
    r.raw(name.data(), name_len);
    const std::uint8_t rank = r.u8();
    std::vector<int> dims(rank);
    std::size_t numel = 1;
    for (int d = 0; d < rank; ++d) {
      dims[d] = static_cast<int>(r.u32());
      numel *= static_cast<std::size_t>(dims[d]);
    }
    std::vector<float> values(numel);
    for (std::size_t k = 0; k < numel; ++k) values[k] = r.f32();

    auto copy_into = [&](Tensor<T>& dst) {
      if (dst.shape != dims)
        throw FormatError("tensor '" + name + "' has unexpected shape in " +
                          path);
      for (std::size_t k = 0; k < numel; ++k)
        dst.v[k] = static_cast<T>(values[k]);
    };

    if (name.rfind("optim.m.", 0) == 0) {
      copy_into(loaded.state.m[trainable_slot(name.substr(8))]);
      loaded.has_state = true;
    } else if (name.rfind("optim.v.", 0) == 0) {
      copy_into(loaded.state.v[trainable_slot(name.substr(8))]);
      loaded.has_state = true;
    } else if (name == "optim.step") {
      loaded.state.step = static_cast<std::int64_t>(values.at(0));
      loaded.has_state = true;
    } else if (name == "optim.epochs") {
      loaded.state.completed_epochs = static_cast<int>(values.at(0));
      loaded.has_state = true;
    } else if (name == "optim.fusion_alpha") {
      loaded.state.fusion_alpha = values.at(0);
      loaded.has_state = true;
    } else if (name == "optim.fusion_beta") {
      loaded.state.fusion_beta = values.at(0);
      loaded.has_state = true;
    } else if (name == "optim.fusion_m") {
      loaded.state.fusion_m[0] = values.at(0);
      loaded.state.fusion_m[1] = values.at(1);
      loaded.has_state = true;
    } else if (name == "optim.fusion_v") {
      loaded.state.fusion_v[0] = values.at(0);
      loaded.state.fusion_v[1] = values.at(1);
      loaded.has_state = true;
    } else if (Tensor<T>* dst = find_param(name)) {
      copy_into(*dst);
    } else {
      throw FormatError("unknown tensor '" + name + "' in " + path);
    }
  }
  if (!r.at_end()) throw FormatError("trailing bytes in " + path);
  return loaded;
}

}  // namespace pressim::nn
