// SPDX-License-Identifier: Apache-2.0
#include "flexpose/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "flexpose/error.hpp"

namespace flexpose::nn {

namespace {

constexpr const char* kMagicLine = "FLEXPOSE-CHECKPOINT 1";

std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return r;
  }
  return v;
}

}  // namespace

const Tensor& Checkpoint::get(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t.value;
  throw IoError("checkpoint has no tensor '" + name + "'");
}

bool Checkpoint::contains(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return true;
  return false;
}

void save_checkpoint(const std::filesystem::path& path, const CheckpointMeta& meta,
                     const std::vector<NamedTensor>& tensors) {
  nlohmann::json header;
  header["kind"] = meta.kind;
  header["seed"] = meta.seed;
  header["step"] = meta.step;
  header["extra"] = meta.extra;
  header["tensors"] = nlohmann::json::array();
  for (const auto& t : tensors) header["tensors"].push_back({{"name", t.name}, {"shape", t.value.shape()}});
  const std::string text = header.dump(2) + "\n";

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << kMagicLine << "\n" << "metadata-bytes " << text.size() << "\n" << text;
  for (const auto& t : tensors) {
    for (double v : t.value.data()) {
      const std::uint64_t bits = to_little_endian(std::bit_cast<std::uint64_t>(v));
      out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
  }
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

void save_checkpoint(const std::filesystem::path& path, const CheckpointMeta& meta,
                     const ParameterList& params) {
  std::vector<NamedTensor> tensors;
  tensors.reserve(params.size());
  for (const Parameter* p : params) tensors.push_back({p->name, p->value});
  save_checkpoint(path, meta, tensors);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != kMagicLine) throw IoError(path.string() + " is not a flexpose checkpoint");
  std::string tag;
  std::size_t n = 0;
  in >> tag >> n;
  in.get();
  if (tag != "metadata-bytes" || !in) throw IoError("bad checkpoint metadata header");
  std::string text(n, '\0');
  in.read(text.data(), static_cast<std::streamsize>(n));
  if (!in) throw IoError("truncated checkpoint metadata");

  Checkpoint ckpt;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint metadata: ") + e.what());
  }
  ckpt.meta.kind = header.at("kind").get<std::string>();
  ckpt.meta.seed = header.at("seed").get<std::uint64_t>();
  ckpt.meta.step = header.at("step").get<std::uint64_t>();
  ckpt.meta.extra = header.value("extra", nlohmann::json::object());
  for (const auto& entry : header.at("tensors")) {
    Tensor t(entry.at("shape").get<std::vector<std::size_t>>());
    for (double& v : t.data()) {
      std::uint64_t bits = 0;
      in.read(reinterpret_cast<char*>(&bits), sizeof bits);
      v = std::bit_cast<double>(to_little_endian(bits));
    }
    if (!in) throw IoError("truncated checkpoint payload");
    ckpt.tensors.push_back({entry.at("name").get<std::string>(), std::move(t)});
  }
  return ckpt;
}

void load_parameters(const Checkpoint& ckpt, const ParameterList& params) {
  for (Parameter* p : params) {
    const Tensor& t = ckpt.get(p->name);
    if (!t.same_shape(p->value)) {
      throw DimensionError("checkpoint tensor " + p->name + " has shape " + t.shape_string() +
                           ", model expects " + p->value.shape_string());
    }
    p->value = t;
  }
}

}  // namespace flexpose::nn
