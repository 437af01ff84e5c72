#include <map>

#include "tomnet/binio.hpp"
#include "tomnet/error.hpp"
#include "tomnet/train.hpp"

namespace tomnet {

namespace {

constexpr std::uint32_t kMagic = fourcc("SPS1");
constexpr std::uint32_t kVersion = 1;

struct Entry {
  std::vector<int> shape;
  std::vector<double> data;
};

void put_entry(ByteWriter& w, const std::string& name,
               const std::vector<int>& shape, const std::vector<double>& data) {
  w.put_string(name);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(shape.size()));
  for (int d : shape) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
  for (double v : data) w.put<double>(v);
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const SpsModel& model,
                                               const AdamState& adam) {
  const auto& params = model.params();
  if (adam.m.size() != params.size() || adam.v.size() != params.size()) {
    throw ShapeError("optimizer state does not match the model");
  }
  ByteWriter w;
  w.put<std::uint32_t>(kMagic);
  w.put<std::uint32_t>(kVersion);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(model.variant()));
  const SpsWidths& wd = model.widths();
  for (int v : {wd.torso, wd.head_wide, wd.head_narrow, wd.head_branch,
                wd.action_hidden}) {
    w.put<std::int32_t>(v);
  }
  const std::size_t count = 3 * params.size() + model.buffers().size() + 1;
  w.put<std::uint32_t>(static_cast<std::uint32_t>(count));
  for (const Param& p : params) put_entry(w, p.name, p.shape, p.value);
  for (const Buffer& b : model.buffers()) put_entry(w, b.name, b.shape, b.value);
  for (std::size_t k = 0; k < params.size(); ++k) {
    put_entry(w, "adam.m:" + params[k].name, params[k].shape, adam.m[k]);
    put_entry(w, "adam.v:" + params[k].name, params[k].shape, adam.v[k]);
  }
  put_entry(w, "adam.step", {1}, {static_cast<double>(adam.step)});
  std::vector<std::uint8_t> out = w.bytes();
  const std::uint32_t crc = crc32(out);
  const auto* c = reinterpret_cast<const std::uint8_t*>(&crc);
  out.insert(out.end(), c, c + sizeof crc);
  return out;
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw FormatError("checkpoint truncated");
  const auto body = bytes.first(bytes.size() - 4);
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + body.size(), sizeof stored);
  ByteReader r(body);
  if (r.get<std::uint32_t>() != kMagic) throw FormatError("not an SPS1 checkpoint");
  if (crc32(body) != stored) throw FormatError("checkpoint CRC mismatch");
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto tag = r.get<std::uint8_t>();
  if (tag > 1) throw FormatError("unknown variant tag");
  SpsWidths wd;
  wd.torso = r.get<std::int32_t>();
  wd.head_wide = r.get<std::int32_t>();
  wd.head_narrow = r.get<std::int32_t>();
  wd.head_branch = r.get<std::int32_t>();
  wd.action_hidden = r.get<std::int32_t>();
  for (int v : {wd.torso, wd.head_wide, wd.head_narrow, wd.head_branch,
                wd.action_hidden}) {
    if (v < 1 || v > 4096) throw FormatError("implausible channel width");
  }

  std::map<std::string, Entry> entries;
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.get_string();
    Entry e;
    const auto ndim = r.get<std::uint32_t>();
    if (ndim > 8) throw FormatError("implausible rank for " + name);
    std::size_t size = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      e.shape.push_back(static_cast<int>(r.get<std::uint32_t>()));
      size *= static_cast<std::size_t>(e.shape.back());
    }
    if (size * sizeof(double) > r.remaining()) throw FormatError("truncated data");
    e.data.resize(size);
    for (double& v : e.data) v = r.get<double>();
    if (!entries.emplace(std::move(name), std::move(e)).second) {
      throw FormatError("duplicate checkpoint entry");
    }
  }
  if (!r.at_end()) throw FormatError("trailing bytes in checkpoint");

  Checkpoint ck{SpsModel::create(static_cast<Variant>(tag), wd, 0), {}};
  auto take = [&](const std::string& name, const std::vector<int>& shape,
                  std::vector<double>& dst) {
    auto it = entries.find(name);
    if (it == entries.end()) throw FormatError("checkpoint lacks " + name);
    if (it->second.shape != shape) throw FormatError("shape mismatch for " + name);
    dst = std::move(it->second.data);
    entries.erase(it);
  };
  ck.adam = AdamState::for_model(ck.model);
  auto& params = ck.model.params();
  for (std::size_t k = 0; k < params.size(); ++k) {
    take(params[k].name, params[k].shape, params[k].value);
    take("adam.m:" + params[k].name, params[k].shape, ck.adam.m[k]);
    take("adam.v:" + params[k].name, params[k].shape, ck.adam.v[k]);
  }
  for (Buffer& b : ck.model.buffers()) take(b.name, b.shape, b.value);
  std::vector<double> step;
  take("adam.step", {1}, step);
  ck.adam.step = static_cast<std::uint64_t>(step[0]);
  if (!entries.empty()) {
    throw FormatError("unexpected checkpoint entry " + entries.begin()->first);
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const SpsModel& model,
                     const AdamState& adam) {
  write_file_atomic(path, serialize_checkpoint(model, adam));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_file(path));
}

}  // namespace tomnet
